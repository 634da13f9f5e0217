#include "ftdl/wire.hpp"

#include <cstring>

#include <zlib.h>

namespace ftdl {

const char* op_name(Op op) {
    switch (op) {
        case Op::AllreduceData: return "allreduce";
        case Op::Seal: return "seal";
        case Op::Bcast: return "bcast";
        case Op::Barrier: return "barrier";
        case Op::ShrinkReport: return "shrink-report";
        case Op::ShrinkCommit: return "shrink-commit";
        case Op::Revoke: return "revoke";
        case Op::Heartbeat: return "heartbeat";
        case Op::Abort: return "abort";
    }
    return "?";
}

namespace {

void put32(uint8_t* p, uint32_t v) { std::memcpy(p, &v, 4); }
uint32_t get32(const uint8_t* p) {
    uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}
void put16(uint8_t* p, uint16_t v) { std::memcpy(p, &v, 2); }
uint16_t get16(const uint8_t* p) {
    uint16_t v;
    std::memcpy(&v, p, 2);
    return v;
}

}  // namespace

std::vector<uint8_t> encode(const WireMessage& msg) {
    std::vector<uint8_t> out(kWireHeaderBytes + msg.payload.size());
    uint8_t* h = out.data();
    put32(h + 0, kWireMagic);
    h[4] = kWireVersion;
    h[5] = static_cast<uint8_t>(msg.op);
    put16(h + 6, msg.flags);
    put32(h + 8, msg.epoch);
    put32(h + 12, msg.sender);
    put32(h + 16, msg.seq);
    put32(h + 20, msg.chunk);
    put32(h + 24, static_cast<uint32_t>(msg.payload.size()));
    std::memcpy(out.data() + kWireHeaderBytes, msg.payload.data(), msg.payload.size());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, h, 28);
    if (!msg.payload.empty()) crc = crc32(crc, msg.payload.data(), static_cast<uInt>(msg.payload.size()));
    put32(h + 28, static_cast<uint32_t>(crc));
    return out;
}

std::optional<WireMessage> decode(const uint8_t* data, size_t len) {
    if (len < kWireHeaderBytes) return std::nullopt;
    if (get32(data) != kWireMagic || data[4] != kWireVersion) return std::nullopt;
    const uint32_t payload_len = get32(data + 24);
    if (len != kWireHeaderBytes + payload_len) return std::nullopt;
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, data, 28);
    if (payload_len) crc = crc32(crc, data + kWireHeaderBytes, payload_len);
    if (static_cast<uint32_t>(crc) != get32(data + 28)) return std::nullopt;
    WireMessage msg;
    msg.op = static_cast<Op>(data[5]);
    msg.flags = get16(data + 6);
    msg.epoch = get32(data + 8);
    msg.sender = get32(data + 12);
    msg.seq = get32(data + 16);
    msg.chunk = get32(data + 20);
    msg.payload.assign(data + kWireHeaderBytes, data + kWireHeaderBytes + payload_len);
    return msg;
}

std::optional<uint32_t> peek_payload_len(const uint8_t header[kWireHeaderBytes]) {
    if (get32(header) != kWireMagic || header[4] != kWireVersion) return std::nullopt;
    return get32(header + 24);
}

std::vector<uint8_t> pack_doubles(const double* v, size_t n, uint64_t total_len) {
    std::vector<uint8_t> p(8 + n * 8);
    std::memcpy(p.data(), &total_len, 8);
    if (n) std::memcpy(p.data() + 8, v, n * 8);
    return p;
}

std::pair<uint64_t, std::vector<double>> unpack_doubles(const WireMessage& msg) {
    if (msg.payload.size() < 8 || (msg.payload.size() - 8) % 8 != 0)
        throw ProtocolError("malformed data payload");
    uint64_t total;
    std::memcpy(&total, msg.payload.data(), 8);
    std::vector<double> v((msg.payload.size() - 8) / 8);
    if (!v.empty()) std::memcpy(v.data(), msg.payload.data() + 8, v.size() * 8);
    return {total, std::move(v)};
}

std::vector<uint8_t> pack_ids(const std::vector<NodeId>& ids) {
    std::vector<uint8_t> p(4 + ids.size() * 4);
    put32(p.data(), static_cast<uint32_t>(ids.size()));
    for (size_t i = 0; i < ids.size(); ++i) put32(p.data() + 4 + i * 4, ids[i]);
    return p;
}

std::vector<NodeId> unpack_ids(const WireMessage& msg, size_t offset) {
    if (msg.payload.size() < offset + 4) throw ProtocolError("malformed id-list payload");
    const uint32_t n = get32(msg.payload.data() + offset);
    if (msg.payload.size() < offset + 4 + n * 4ull) throw ProtocolError("malformed id-list payload");
    std::vector<NodeId> ids(n);
    for (uint32_t i = 0; i < n; ++i) ids[i] = get32(msg.payload.data() + offset + 4 + i * 4);
    return ids;
}

std::vector<uint8_t> pack_shrink_report(const ShrinkReportBody& body) {
    std::vector<uint8_t> p(5);
    put32(p.data(), body.ctx_seq);
    p[4] = body.data_complete;
    auto ids = pack_ids(body.suspects);
    p.insert(p.end(), ids.begin(), ids.end());
    return p;
}

ShrinkReportBody unpack_shrink_report(const WireMessage& msg) {
    if (msg.payload.size() < 5) throw ProtocolError("malformed shrink report");
    ShrinkReportBody body;
    body.ctx_seq = get32(msg.payload.data());
    body.data_complete = msg.payload[4];
    body.suspects = unpack_ids(msg, 5);
    return body;
}

std::vector<uint8_t> pack_shrink_commit(const ShrinkCommitBody& body) {
    std::vector<uint8_t> p(4);
    put32(p.data(), body.new_epoch);
    auto ids = pack_ids(body.members);
    p.insert(p.end(), ids.begin(), ids.end());
    std::vector<uint8_t> v(4 + body.verdicts.size() * 5);
    put32(v.data(), static_cast<uint32_t>(body.verdicts.size()));
    for (size_t i = 0; i < body.verdicts.size(); ++i) {
        put32(v.data() + 4 + i * 5, body.verdicts[i].first);
        v[4 + i * 5 + 4] = body.verdicts[i].second;
    }
    p.insert(p.end(), v.begin(), v.end());
    return p;
}

ShrinkCommitBody unpack_shrink_commit(const WireMessage& msg) {
    if (msg.payload.size() < 8) throw ProtocolError("malformed shrink commit");
    ShrinkCommitBody body;
    body.new_epoch = get32(msg.payload.data());
    body.members = unpack_ids(msg, 4);
    const size_t voff = 4 + 4 + body.members.size() * 4;
    if (msg.payload.size() < voff + 4) throw ProtocolError("malformed shrink commit");
    const uint32_t nv = get32(msg.payload.data() + voff);
    if (msg.payload.size() < voff + 4 + nv * 5ull) throw ProtocolError("malformed shrink commit");
    for (uint32_t i = 0; i < nv; ++i) {
        const uint8_t* q = msg.payload.data() + voff + 4 + i * 5;
        body.verdicts.emplace_back(get32(q), q[4]);
    }
    return body;
}

}  // namespace ftdl
