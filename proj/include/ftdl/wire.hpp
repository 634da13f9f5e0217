#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ftdl/common.hpp"

namespace ftdl {

/// Message kinds on the wire. Heartbeats are consumed by the transport layer
/// and never reach a mailbox.
enum class Op : uint8_t {
    AllreduceData = 1,  // ring reduce-scatter / allgather chunk
    Seal = 2,           // allreduce completion wave (chunk field = lap 1 or 2)
    Bcast = 3,
    Barrier = 4,
    ShrinkReport = 5,   // member -> coordinator: suspect set + context
    ShrinkCommit = 6,   // coordinator -> all, echoed once by every receiver
    Revoke = 7,         // "sender has abandoned this epoch"; carries suspects
    Heartbeat = 8,
    Abort = 9,          // unrecoverable protocol error, flood to all
};

const char* op_name(Op op);

/// Fixed 32-byte little-endian header followed by the payload:
///   offset 0  u32 magic        'FTDL' (0x4C445446)
///   offset 4  u8  version      (1)
///   offset 5  u8  op
///   offset 6  u16 flags        (op-specific; ShrinkCommit bit0 = reduce-valid)
///   offset 8  u32 epoch
///   offset 12 u32 sender       node id
///   offset 16 u32 seq          collective sequence number (batch counter)
///   offset 20 u32 chunk        chunk index / ring step / lap
///   offset 24 u32 payload_len  bytes following the header
///   offset 28 u32 crc32        zlib crc32 over header[0:28] + payload
struct WireMessage {
    Op op = Op::Heartbeat;
    uint16_t flags = 0;
    uint32_t epoch = 0;
    NodeId sender = 0;
    uint32_t seq = 0;
    uint32_t chunk = 0;
    std::vector<uint8_t> payload;
};

constexpr size_t kWireHeaderBytes = 32;
constexpr uint32_t kWireMagic = 0x4C445446;
constexpr uint8_t kWireVersion = 1;

std::vector<uint8_t> encode(const WireMessage& msg);
/// Returns nullopt on bad magic/version/length/checksum.
std::optional<WireMessage> decode(const uint8_t* data, size_t len);
/// Parses just the payload length from a header (for stream framing).
std::optional<uint32_t> peek_payload_len(const uint8_t header[kWireHeaderBytes]);

// payload helpers
std::vector<uint8_t> pack_doubles(const double* v, size_t n, uint64_t total_len);
/// Returns (total_len, values); throws ProtocolError on malformed payload.
std::pair<uint64_t, std::vector<double>> unpack_doubles(const WireMessage& msg);

std::vector<uint8_t> pack_ids(const std::vector<NodeId>& ids);
std::vector<NodeId> unpack_ids(const WireMessage& msg, size_t offset = 0);

struct ShrinkReportBody {
    std::vector<NodeId> suspects;
    uint32_t ctx_seq = UINT32_MAX;   // collective the reporter was in, if any
    uint8_t data_complete = 0;       // reporter holds a full reduction result
};
std::vector<uint8_t> pack_shrink_report(const ShrinkReportBody& body);
ShrinkReportBody unpack_shrink_report(const WireMessage& msg);

struct ShrinkCommitBody {
    uint32_t new_epoch = 0;
    std::vector<NodeId> members;
    // per-seq verdict: true when every survivor in that collective already
    // holds the complete reduction (no retry needed)
    std::vector<std::pair<uint32_t, uint8_t>> verdicts;
};
std::vector<uint8_t> pack_shrink_commit(const ShrinkCommitBody& body);
ShrinkCommitBody unpack_shrink_commit(const WireMessage& msg);

}  // namespace ftdl
