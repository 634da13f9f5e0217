#include "ftdl/heartbeat.hpp"

namespace ftdl {

HeartbeatService::HeartbeatService(Transport& transport, std::vector<NodeId> peers,
                                   double interval_ms, double timeout_ms)
    : transport_(transport), peers_(std::move(peers)), interval_ms_(interval_ms),
      timeout_ms_(timeout_ms) {}

HeartbeatService::~HeartbeatService() { stop(); }

void HeartbeatService::start() {
    if (running_.exchange(true)) return;
    started_ = std::chrono::steady_clock::now();
    {
        std::lock_guard<std::mutex> lk(m_);
        for (NodeId p : peers_) last_heard_[p] = started_;  // grace period at startup
    }
    transport_.set_heartbeat_sink([this](NodeId from) {
        std::lock_guard<std::mutex> lk(m_);
        last_heard_[from] = std::chrono::steady_clock::now();
    });
    thread_ = std::thread([this] { loop(); });
}

void HeartbeatService::stop() {
    if (!running_.exchange(false)) return;
    if (thread_.joinable()) thread_.join();
}

void HeartbeatService::loop() {
    WireMessage hb;
    hb.op = Op::Heartbeat;
    hb.sender = transport_.self();
    while (running_.load()) {
        for (NodeId p : peers_) {
            if (!transport_.peer_closed(p)) transport_.send(p, hb);
        }
        const auto now = std::chrono::steady_clock::now();
        {
            std::lock_guard<std::mutex> lk(m_);
            for (NodeId p : peers_) {
                if (suspected_.count(p)) continue;
                const double silent_ms =
                    std::chrono::duration<double, std::milli>(now - last_heard_[p]).count();
                if (silent_ms > timeout_ms_ || transport_.peer_closed(p)) {
                    suspected_.insert(p);
                    notices_.push_back(
                        {p, std::chrono::duration<double, std::milli>(now - started_).count()});
                }
            }
        }
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(interval_ms_));
    }
}

bool HeartbeatService::suspected(NodeId id) const {
    std::lock_guard<std::mutex> lk(m_);
    return suspected_.count(id) > 0;
}

std::set<NodeId> HeartbeatService::all_suspected() const {
    std::lock_guard<std::mutex> lk(m_);
    return suspected_;
}

std::vector<FaultNotice> HeartbeatService::drain_notices() {
    std::lock_guard<std::mutex> lk(m_);
    auto out = std::move(notices_);
    notices_.clear();
    return out;
}

}  // namespace ftdl
