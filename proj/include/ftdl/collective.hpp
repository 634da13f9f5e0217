#pragma once

#include <functional>
#include <optional>
#include <set>

#include "ftdl/clock.hpp"
#include "ftdl/fault.hpp"
#include "ftdl/heartbeat.hpp"
#include "ftdl/transport.hpp"

namespace ftdl {

/// Result of a collective: either a value or a set of suspected-dead nodes.
/// Failure is always reported, never a hang.
template <typename T>
struct CollectiveOutcome {
    std::optional<T> value;
    std::set<NodeId> suspected;

    bool ok() const { return value.has_value(); }
};

struct CommConfig {
    double peer_timeout_ms = 2000.0;    // real-clock: silence on an expected peer
    double shrink_timeout_ms = 3000.0;  // real-clock: report/commit waits
    double safety_timeout_ms = 120000.0;  // watchdog for the deterministic mode
};

/// Epoch-numbered membership view with failure-reporting collectives and a
/// shrink operation. Semantics: any member failure detected during a
/// collective yields Failed(suspects) at every live participant; shrink then
/// builds an identical survivor communicator (epoch + 1) at every survivor.
///
/// Ring allreduce: reduce-scatter + allgather in 2(n-1) data steps, followed
/// by a two-lap completion wave. The wave closes the window where some ranks
/// hold the finished sum and others do not when a member dies at the tail of
/// the allgather: during shrink the survivors agree, per collective sequence
/// number, whether everyone already holds the full reduction (commit verdict),
/// so the retry decision is uniform and replicas never diverge.
class Communicator {
  public:
    enum class State { Healthy, Revoked };

    Communicator(Transport& transport, std::vector<NodeId> members, RunClock clock,
                 CommConfig cfg = {}, HeartbeatService* heartbeat = nullptr,
                 FaultInjector* injector = nullptr);

    uint32_t epoch() const { return epoch_; }
    const std::vector<NodeId>& members() const { return members_; }
    uint32_t size() const { return static_cast<uint32_t>(members_.size()); }
    uint32_t rank() const { return rank_; }
    NodeId self() const { return self_; }
    State state() const { return state_; }
    bool healthy() const { return state_ == State::Healthy; }

    CollectiveOutcome<std::vector<double>> allreduce_sum(const std::vector<double>& data);
    CollectiveOutcome<std::vector<double>> broadcast(NodeId root, const std::vector<double>& data);
    CollectiveOutcome<bool> barrier();

    struct ShrinkInfo {
        bool reduce_valid = false;  // verdict for the collective this caller was in
        uint32_t rounds = 0;
        double modeled_ms = 0.0;
    };
    /// Agreement on the survivor membership. All survivors return an identical
    /// (epoch, member list). ctx_seq/data_complete describe the collective the
    /// caller was executing when it failed, if any.
    ShrinkInfo shrink(std::set<NodeId> suspects, uint32_t ctx_seq = UINT32_MAX,
                      bool data_complete = false);

    struct ReduceResult {
        std::vector<double> value;
        uint32_t divisor = 1;  // membership size of the epoch where the sum completed
        uint32_t shrink_count = 0;
        double shrink_ms = 0.0;
        double modeled_comm_ms = 0.0;
    };
    /// Retries { allreduce; on failure shrink } until the reduction succeeds.
    /// Fault-free this is allreduce_sum plus one branch.
    ReduceResult allreduce_until_success(const std::vector<double>& data);

    double modeled_allreduce_ms(size_t len) const;

    /// Test hook: called with (op, wall-ms, ok) when a collective returns.
    std::function<void(Op, double, bool)> on_return;

  private:
    struct RingAbortEx {
        std::set<NodeId> suspects;
    };
    struct RecvOutcome {
        enum class Kind { Data, Revoked, Closed } kind;
        WireMessage msg;
        std::set<NodeId> carried;
    };

    CollectiveOutcome<std::vector<double>> ring_allreduce(const std::vector<double>& data, Op op,
                                                          uint32_t seq);
    RecvOutcome ring_recv(NodeId from, Op op, uint32_t seq, uint32_t chunk_tag, double timeout_ms,
                          FaultOp fop);
    MsgPredicate discard_pred() const;
    void send_msg(NodeId to, const WireMessage& msg);
    void revoke_epoch();
    void abort_run(const std::string& why);
    void adopt_commit(const struct ShrinkCommitBody& body);
    void fault_action(FaultOp op);

    Transport& tp_;
    RunClock clock_;
    CommConfig cfg_;
    HeartbeatService* hb_;
    FaultInjector* fi_;

    uint32_t epoch_ = 0;
    std::vector<NodeId> members_;
    NodeId self_;
    uint32_t rank_ = 0;
    State state_ = State::Healthy;
    uint32_t seq_ = 0;

    std::set<NodeId> pending_suspects_;
    bool last_data_complete_ = false;
    std::vector<double> held_sum_;
    bool revoke_sent_ = false;  // once per epoch
};

}  // namespace ftdl
