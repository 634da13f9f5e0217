#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ftdl/wire.hpp"

namespace ftdl {

struct NodeEndpoint {
    NodeId id = 0;
    std::string address;  // in-process mailbox key or host:port
};

struct OpLatency {
    uint64_t count = 0;
    double total_ms = 0.0;
};

struct MailboxStats {
    uint64_t sent = 0;
    uint64_t received = 0;
    uint64_t dropped = 0;  // sends to dead peers + epoch-fenced discards
    uint64_t bytes_sent = 0;
    uint64_t bytes_received = 0;
    std::map<Op, OpLatency> send_latency;
};

enum class SendStatus { Ok, PeerClosed, UnknownPeer };
enum class RecvStatus { Msg, SenderClosed, Timeout };

struct RecvResult {
    RecvStatus status = RecvStatus::Timeout;
    WireMessage msg;
};

using MsgPredicate = std::function<bool(const WireMessage&)>;

/// Point-to-point transport handle owned by one node. FIFO per sender-receiver
/// pair. Sends never block; a send to a dead peer reports PeerClosed but
/// failure handling is driven from the receive side, which keeps protocol
/// outcomes independent of scheduling.
class Transport {
  public:
    virtual ~Transport() = default;

    virtual NodeId self() const = 0;
    virtual SendStatus send(NodeId to, const WireMessage& msg) = 0;

    /// Blocks until a queued message satisfies `match` (it is removed and
    /// returned; earliest arrival wins), every node in `watch` being closed
    /// while nothing matches (SenderClosed), or the deadline passes.
    /// Messages satisfying `discard` are dropped during scans and counted in
    /// stats.dropped.
    virtual RecvResult recv_match(const MsgPredicate& match, const std::vector<NodeId>& watch,
                                  std::chrono::steady_clock::time_point deadline,
                                  const MsgPredicate& discard) = 0;

    virtual bool peer_closed(NodeId id) const = 0;
    virtual void close_self() = 0;
    virtual MailboxStats stats() const = 0;

    /// Heartbeats are delivered to this sink instead of the mailbox.
    virtual void set_heartbeat_sink(std::function<void(NodeId)> sink) = 0;
};

}  // namespace ftdl
