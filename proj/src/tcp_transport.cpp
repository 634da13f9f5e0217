#include "ftdl/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace ftdl {

std::vector<HostfileEntry> parse_hostfile(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open hostfile: " + path);
    std::vector<HostfileEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        HostfileEntry e;
        if (!(ss >> e.id)) continue;
        if (!(ss >> e.host >> e.port))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": want '<id> <host> <port>'");
        entries.push_back(e);
    }
    if (entries.empty()) throw ConfigError("hostfile is empty: " + path);
    return entries;
}

void write_hostfile(const std::string& path, const std::vector<HostfileEntry>& entries) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write hostfile: " + path);
    for (const auto& e : entries) f << e.id << ' ' << e.host << ' ' << e.port << '\n';
}

namespace {

struct Peer {
    int fd = -1;
    std::mutex write_mutex;
    std::atomic<bool> closed{false};
    std::thread reader;
};

bool read_exact(int fd, uint8_t* buf, size_t n) {
    size_t off = 0;
    while (off < n) {
        const ssize_t r = ::recv(fd, buf + off, n - off, 0);
        if (r <= 0) return false;
        off += static_cast<size_t>(r);
    }
    return true;
}

bool write_all(int fd, const uint8_t* buf, size_t n) {
    size_t off = 0;
    while (off < n) {
        const ssize_t r = ::send(fd, buf + off, n - off, MSG_NOSIGNAL);
        if (r <= 0) return false;
        off += static_cast<size_t>(r);
    }
    return true;
}

}  // namespace

struct TcpTransport::Impl {
    NodeId self;
    std::map<NodeId, std::unique_ptr<Peer>> peers;
    std::atomic<bool> shutting_down{false};

    std::mutex m;  // guards q, stats, hb_sink
    std::condition_variable cv;
    std::deque<WireMessage> q;
    MailboxStats stats;
    std::function<void(NodeId)> hb_sink;

    void reader_loop(Peer* peer) {
        std::vector<uint8_t> frame;
        for (;;) {
            uint8_t header[kWireHeaderBytes];
            if (!read_exact(peer->fd, header, kWireHeaderBytes)) break;
            auto plen = peek_payload_len(header);
            if (!plen) break;  // garbage on a stream socket: drop the peer
            frame.assign(header, header + kWireHeaderBytes);
            frame.resize(kWireHeaderBytes + *plen);
            if (*plen && !read_exact(peer->fd, frame.data() + kWireHeaderBytes, *plen)) break;
            auto msg = decode(frame.data(), frame.size());
            if (!msg) break;  // checksum failure
            if (msg->op == Op::Heartbeat) {
                std::function<void(NodeId)> sink;
                {
                    std::lock_guard<std::mutex> lk(m);
                    sink = hb_sink;
                }
                if (sink) sink(msg->sender);
                continue;
            }
            {
                std::lock_guard<std::mutex> lk(m);
                stats.received++;
                stats.bytes_received += frame.size();
                q.push_back(std::move(*msg));
            }
            cv.notify_all();
        }
        peer->closed.store(true, std::memory_order_release);
        cv.notify_all();
    }
};

TcpTransport::TcpTransport(NodeId self, const std::vector<HostfileEntry>& entries,
                           double connect_timeout_ms)
    : impl_(std::make_unique<Impl>()) {
    impl_->self = self;
    const HostfileEntry* own = nullptr;
    for (const auto& e : entries)
        if (e.id == self) own = &e;
    if (!own) throw ConfigError("hostfile does not list this node id");

    size_t expect_inbound = 0;
    for (const auto& e : entries) {
        if (e.id == self) continue;
        impl_->peers[e.id] = std::make_unique<Peer>();
        if (e.id > self) ++expect_inbound;
    }

    int listen_fd = -1;
    if (expect_inbound > 0) {
        listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd < 0) throw IoError("socket() failed");
        int one = 1;
        ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(own->port);
        addr.sin_addr.s_addr = ::inet_addr(own->host.c_str());
        if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(listen_fd);
            throw IoError("bind() failed on port " + std::to_string(own->port));
        }
        if (::listen(listen_fd, 64) != 0) {
            ::close(listen_fd);
            throw IoError("listen() failed");
        }
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double, std::milli>(connect_timeout_ms));

    // outbound: connect to every lower id, retrying while peers start up
    for (const auto& e : entries) {
        if (e.id >= self) continue;
        int fd = -1;
        for (;;) {
            fd = ::socket(AF_INET, SOCK_STREAM, 0);
            if (fd < 0) throw IoError("socket() failed");
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_port = htons(e.port);
            addr.sin_addr.s_addr = ::inet_addr(e.host.c_str());
            if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) break;
            ::close(fd);
            fd = -1;
            if (std::chrono::steady_clock::now() > deadline)
                throw IoError("cannot connect to node " + std::to_string(e.id));
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        const uint32_t hello = self;
        if (!write_all(fd, reinterpret_cast<const uint8_t*>(&hello), 4))
            throw IoError("handshake write failed");
        impl_->peers[e.id]->fd = fd;
    }

    // inbound: accept from every higher id
    for (size_t i = 0; i < expect_inbound; ++i) {
        const int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd < 0) throw IoError("accept() failed");
        uint32_t hello = 0;
        if (!read_exact(fd, reinterpret_cast<uint8_t*>(&hello), 4))
            throw IoError("handshake read failed");
        auto it = impl_->peers.find(hello);
        if (it == impl_->peers.end() || it->second->fd != -1) {
            ::close(fd);
            throw IoError("unexpected handshake from node " + std::to_string(hello));
        }
        it->second->fd = fd;
    }
    if (listen_fd >= 0) ::close(listen_fd);

    for (auto& [id, peer] : impl_->peers) {
        const int one = 1;
        ::setsockopt(peer->fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        Peer* p = peer.get();
        p->reader = std::thread([this, p] { impl_->reader_loop(p); });
    }
}

TcpTransport::~TcpTransport() {
    impl_->shutting_down.store(true);
    for (auto& [id, peer] : impl_->peers) {
        if (peer->fd >= 0) ::shutdown(peer->fd, SHUT_RDWR);
    }
    for (auto& [id, peer] : impl_->peers) {
        if (peer->reader.joinable()) peer->reader.join();
        if (peer->fd >= 0) ::close(peer->fd);
    }
}

NodeId TcpTransport::self() const { return impl_->self; }

SendStatus TcpTransport::send(NodeId to, const WireMessage& msg) {
    auto it = impl_->peers.find(to);
    if (it == impl_->peers.end()) {
        if (to == impl_->self) {  // self-send loops straight into the mailbox
            std::lock_guard<std::mutex> lk(impl_->m);
            impl_->q.push_back(msg);
            impl_->stats.sent++;
            impl_->stats.received++;
            impl_->cv.notify_all();
            return SendStatus::Ok;
        }
        return SendStatus::UnknownPeer;
    }
    Peer& peer = *it->second;
    const auto t0 = std::chrono::steady_clock::now();
    SendStatus status = SendStatus::Ok;
    if (peer.closed.load(std::memory_order_acquire)) {
        status = SendStatus::PeerClosed;
    } else {
        const auto frame = encode(msg);
        std::lock_guard<std::mutex> wl(peer.write_mutex);
        if (!write_all(peer.fd, frame.data(), frame.size())) {
            peer.closed.store(true, std::memory_order_release);
            impl_->cv.notify_all();
            status = SendStatus::PeerClosed;
        }
    }
    std::lock_guard<std::mutex> lk(impl_->m);
    if (status == SendStatus::Ok) {
        impl_->stats.sent++;
        impl_->stats.bytes_sent += kWireHeaderBytes + msg.payload.size();
    } else {
        impl_->stats.dropped++;
    }
    auto& lat = impl_->stats.send_latency[msg.op];
    lat.count++;
    lat.total_ms +=
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return status;
}

RecvResult TcpTransport::recv_match(const MsgPredicate& match, const std::vector<NodeId>& watch,
                                    std::chrono::steady_clock::time_point deadline,
                                    const MsgPredicate& discard) {
    std::unique_lock<std::mutex> lk(impl_->m);
    for (;;) {
        for (auto it = impl_->q.begin(); it != impl_->q.end();) {
            if (discard && discard(*it)) {
                impl_->stats.dropped++;
                it = impl_->q.erase(it);
                continue;
            }
            if (match(*it)) {
                RecvResult r{RecvStatus::Msg, std::move(*it)};
                impl_->q.erase(it);
                return r;
            }
            ++it;
        }
        if (!watch.empty()) {
            bool all_closed = true;
            for (NodeId w : watch) {
                auto pit = impl_->peers.find(w);
                if (pit != impl_->peers.end() &&
                    !pit->second->closed.load(std::memory_order_acquire))
                    all_closed = false;
            }
            if (all_closed) return {RecvStatus::SenderClosed, {}};
        }
        if (std::chrono::steady_clock::now() >= deadline) return {RecvStatus::Timeout, {}};
        impl_->cv.wait_until(lk, deadline);
    }
}

bool TcpTransport::peer_closed(NodeId id) const {
    auto it = impl_->peers.find(id);
    if (it == impl_->peers.end()) return id != impl_->self;
    return it->second->closed.load(std::memory_order_acquire);
}

void TcpTransport::close_self() {
    for (auto& [id, peer] : impl_->peers)
        if (peer->fd >= 0) ::shutdown(peer->fd, SHUT_RDWR);
}

MailboxStats TcpTransport::stats() const {
    std::lock_guard<std::mutex> lk(impl_->m);
    return impl_->stats;
}

void TcpTransport::set_heartbeat_sink(std::function<void(NodeId)> sink) {
    std::lock_guard<std::mutex> lk(impl_->m);
    impl_->hb_sink = std::move(sink);
}

}  // namespace ftdl
