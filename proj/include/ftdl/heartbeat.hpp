#pragma once

#include <atomic>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "ftdl/transport.hpp"

namespace ftdl {

struct FaultNotice {
    NodeId node;
    double detected_after_ms;  // since service start
};

/// Periodic liveness prober. Sends a heartbeat to every peer each interval
/// and suspects any peer unheard-from for `timeout`. Suspicion is sticky:
/// faults are permanent in this system. Runs only under the real clock; the
/// deterministic in-process mode detects failures structurally through
/// closed mailboxes and keeps this service off.
class HeartbeatService {
  public:
    HeartbeatService(Transport& transport, std::vector<NodeId> peers, double interval_ms,
                     double timeout_ms);
    ~HeartbeatService();

    void start();
    void stop();

    bool suspected(NodeId id) const;
    std::set<NodeId> all_suspected() const;
    /// Returns notices emitted since the last drain.
    std::vector<FaultNotice> drain_notices();

    double interval_ms() const { return interval_ms_; }
    double timeout_ms() const { return timeout_ms_; }

  private:
    void loop();

    Transport& transport_;
    std::vector<NodeId> peers_;
    double interval_ms_;
    double timeout_ms_;

    mutable std::mutex m_;
    std::map<NodeId, std::chrono::steady_clock::time_point> last_heard_;
    std::set<NodeId> suspected_;
    std::vector<FaultNotice> notices_;
    std::chrono::steady_clock::time_point started_;
    std::thread thread_;
    std::atomic<bool> running_{false};
};

}  // namespace ftdl
