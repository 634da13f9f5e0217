#include "ftdl/inproc_transport.hpp"

#include <atomic>

namespace ftdl {

// Node.closed is atomic so watch checks and send-side checks never take
// another node's lock while holding their own (no lock-order cycles).
// kill() flips the flag first and then notifies under each mailbox lock,
// which closes the missed-wakeup window for receivers blocked on a watch.
struct InprocNet::Node {
    std::atomic<bool> closed{false};
    std::mutex m;  // guards q, stats, hb_sink
    std::condition_variable cv;
    std::deque<WireMessage> q;
    MailboxStats stats;
    std::function<void(NodeId)> hb_sink;
};

class InprocTransport : public Transport {
  public:
    InprocTransport(InprocNet* net, NodeId id) : net_(net), id_(id) {}

    NodeId self() const override { return id_; }

    SendStatus send(NodeId to, const WireMessage& msg) override {
        auto it = net_->nodes_.find(to);
        if (it == net_->nodes_.end()) return SendStatus::UnknownPeer;
        if (net_->closed(id_)) return SendStatus::PeerClosed;  // a dead node never speaks again
        const auto t0 = std::chrono::steady_clock::now();
        const uint64_t bytes = kWireHeaderBytes + msg.payload.size();
        InprocNet::Node& dst = *it->second;
        SendStatus status = SendStatus::Ok;
        if (dst.closed.load(std::memory_order_acquire)) {
            status = SendStatus::PeerClosed;
        } else if (msg.op == Op::Heartbeat) {
            std::function<void(NodeId)> sink;
            {
                std::lock_guard<std::mutex> lk(dst.m);
                sink = dst.hb_sink;
            }
            if (sink) sink(msg.sender);
        } else {
            std::lock_guard<std::mutex> lk(dst.m);
            dst.q.push_back(msg);
            dst.cv.notify_all();
        }
        InprocNet::Node& me = *net_->nodes_.at(id_);
        std::lock_guard<std::mutex> lk(me.m);
        if (status == SendStatus::Ok) {
            me.stats.sent++;
            me.stats.bytes_sent += bytes;
        } else {
            me.stats.dropped++;
        }
        auto& lat = me.stats.send_latency[msg.op];
        lat.count++;
        lat.total_ms +=
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return status;
    }

    RecvResult recv_match(const MsgPredicate& match, const std::vector<NodeId>& watch,
                          std::chrono::steady_clock::time_point deadline,
                          const MsgPredicate& discard) override {
        InprocNet::Node& me = *net_->nodes_.at(id_);
        std::unique_lock<std::mutex> lk(me.m);
        for (;;) {
            for (auto it = me.q.begin(); it != me.q.end();) {
                if (discard && discard(*it)) {
                    me.stats.dropped++;
                    it = me.q.erase(it);
                    continue;
                }
                if (match(*it)) {
                    RecvResult r{RecvStatus::Msg, std::move(*it)};
                    me.q.erase(it);
                    me.stats.received++;
                    me.stats.bytes_received += kWireHeaderBytes + r.msg.payload.size();
                    return r;
                }
                ++it;
            }
            if (!watch.empty()) {
                bool all_closed = true;
                for (NodeId w : watch)
                    if (!net_->closed(w)) all_closed = false;
                if (all_closed) return {RecvStatus::SenderClosed, {}};
            }
            if (std::chrono::steady_clock::now() >= deadline) return {RecvStatus::Timeout, {}};
            me.cv.wait_until(lk, deadline);
        }
    }

    bool peer_closed(NodeId id) const override { return net_->closed(id); }

    void close_self() override { net_->kill(id_); }

    MailboxStats stats() const override {
        InprocNet::Node& me = *net_->nodes_.at(id_);
        std::lock_guard<std::mutex> lk(me.m);
        return me.stats;
    }

    void set_heartbeat_sink(std::function<void(NodeId)> sink) override {
        InprocNet::Node& me = *net_->nodes_.at(id_);
        std::lock_guard<std::mutex> lk(me.m);
        me.hb_sink = std::move(sink);
    }

  private:
    InprocNet* net_;
    NodeId id_;
};

InprocNet::InprocNet(const std::vector<NodeId>& ids) {
    for (NodeId id : ids) nodes_[id] = std::make_unique<Node>();
    for (NodeId id : ids) handles_.push_back(std::make_unique<InprocTransport>(this, id));
}

InprocNet::~InprocNet() = default;

Transport& InprocNet::node(NodeId id) {
    for (auto& h : handles_)
        if (h->self() == id) return *h;
    throw Error("unknown in-process node id " + std::to_string(id));
}

void InprocNet::kill(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error("kill: unknown node id " + std::to_string(id));
    it->second->closed.store(true, std::memory_order_release);
    // wake every waiter: someone may be blocked watching this node
    for (auto& [nid, node] : nodes_) {
        std::lock_guard<std::mutex> lk(node->m);
        node->cv.notify_all();
    }
}

bool InprocNet::closed(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return true;
    return it->second->closed.load(std::memory_order_acquire);
}

std::vector<NodeId> InprocNet::ids() const {
    std::vector<NodeId> out;
    for (const auto& [id, _] : nodes_) out.push_back(id);
    return out;
}

}  // namespace ftdl
