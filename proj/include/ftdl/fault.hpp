#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ftdl/common.hpp"

namespace ftdl {

/// Protocol families a step trigger can name on the command line.
enum class FaultOp : uint8_t { Allreduce, Bcast, Barrier, Shrink };

const char* fault_op_name(FaultOp op);
FaultOp parse_fault_op(const std::string& name);

struct FaultTrigger {
    enum class When { AtBatch, AtStep };
    When when = When::AtBatch;
    uint64_t batch = 0;   // AtBatch: fires after local forward/backward of this batch
    FaultOp op = FaultOp::Allreduce;  // AtStep
    uint64_t step = 0;    // AtStep: fires before the step-th protocol action of `op`
};

/// Kill schedule for a run. Built from repeatable CLI flags:
///   --fail <node>@batch:<k>
///   --fail <node>@step:<op>:<i>      op in {allreduce, bcast, barrier, shrink}
struct FaultPlan {
    std::map<NodeId, std::vector<FaultTrigger>> triggers;

    bool empty() const { return triggers.empty(); }
    static FaultPlan parse(const std::vector<std::string>& flags);
    std::string to_flags() const;
    /// Throws ConfigError when a victim is not a member of the run.
    void validate(const std::vector<NodeId>& members) const;
};

/// Per-worker trigger evaluation. The kill action is transport-specific:
/// in-process workers close their mailbox and unwind via KilledSignal; TCP
/// workers raise SIGKILL on themselves.
class FaultInjector {
  public:
    FaultInjector() = default;
    FaultInjector(const FaultPlan& plan, NodeId self, std::function<void()> kill_action);

    /// Called once per batch, after the local forward/backward pass and
    /// before gradient synchronization (the worst interesting moment).
    void on_batch(uint64_t batch);
    /// Called before every protocol send/receive of a collective.
    void on_action(FaultOp op);

    uint64_t action_count(FaultOp op) const;

  private:
    std::vector<FaultTrigger> mine_;
    std::function<void()> kill_;
    std::map<FaultOp, uint64_t> action_counts_;
};

}  // namespace ftdl
