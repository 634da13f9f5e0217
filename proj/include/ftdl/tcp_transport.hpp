#pragma once

#include <memory>

#include "ftdl/transport.hpp"

namespace ftdl {

struct HostfileEntry {
    NodeId id = 0;
    std::string host = "127.0.0.1";
    uint16_t port = 0;
};

/// One line per node: "<id> <host> <port>".
std::vector<HostfileEntry> parse_hostfile(const std::string& path);
void write_hostfile(const std::string& path, const std::vector<HostfileEntry>& entries);

/// TCP point-to-point transport: one connection per pair (the higher id
/// connects to the lower id's listen port), framed WireMessages, one reader
/// thread per peer feeding a single mailbox. A peer whose connection drops is
/// permanently closed: reconnects are refused, dead nodes stay dead.
class TcpTransport : public Transport {
  public:
    TcpTransport(NodeId self, const std::vector<HostfileEntry>& peers,
                 double connect_timeout_ms = 15000.0);
    ~TcpTransport() override;

    NodeId self() const override;
    SendStatus send(NodeId to, const WireMessage& msg) override;
    RecvResult recv_match(const MsgPredicate& match, const std::vector<NodeId>& watch,
                          std::chrono::steady_clock::time_point deadline,
                          const MsgPredicate& discard) override;
    bool peer_closed(NodeId id) const override;
    void close_self() override;
    MailboxStats stats() const override;
    void set_heartbeat_sink(std::function<void(NodeId)> sink) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ftdl
