#include "ftdl/fault.hpp"

#include <algorithm>

namespace ftdl {

const char* fault_op_name(FaultOp op) {
    switch (op) {
        case FaultOp::Allreduce: return "allreduce";
        case FaultOp::Bcast: return "bcast";
        case FaultOp::Barrier: return "barrier";
        case FaultOp::Shrink: return "shrink";
    }
    return "?";
}

FaultOp parse_fault_op(const std::string& name) {
    if (name == "allreduce") return FaultOp::Allreduce;
    if (name == "bcast") return FaultOp::Bcast;
    if (name == "barrier") return FaultOp::Barrier;
    if (name == "shrink") return FaultOp::Shrink;
    throw ConfigError("unknown fault op '" + name + "'");
}

FaultPlan FaultPlan::parse(const std::vector<std::string>& flags) {
    FaultPlan plan;
    for (const auto& flag : flags) {
        const auto at = flag.find('@');
        if (at == std::string::npos)
            throw ConfigError("bad --fail value '" + flag + "' (want <node>@batch:<k> or <node>@step:<op>:<i>)");
        NodeId node;
        try {
            node = static_cast<NodeId>(std::stoul(flag.substr(0, at)));
        } catch (...) {
            throw ConfigError("bad node id in --fail value '" + flag + "'");
        }
        const std::string rest = flag.substr(at + 1);
        FaultTrigger t;
        if (rest.rfind("batch:", 0) == 0) {
            t.when = FaultTrigger::When::AtBatch;
            t.batch = std::stoull(rest.substr(6));
        } else if (rest.rfind("step:", 0) == 0) {
            const std::string spec = rest.substr(5);
            const auto colon = spec.find(':');
            if (colon == std::string::npos)
                throw ConfigError("bad --fail step trigger '" + flag + "'");
            t.when = FaultTrigger::When::AtStep;
            t.op = parse_fault_op(spec.substr(0, colon));
            t.step = std::stoull(spec.substr(colon + 1));
        } else {
            throw ConfigError("bad --fail trigger '" + flag + "'");
        }
        plan.triggers[node].push_back(t);
    }
    return plan;
}

std::string FaultPlan::to_flags() const {
    std::string out;
    for (const auto& [node, ts] : triggers) {
        for (const auto& t : ts) {
            if (!out.empty()) out += ' ';
            out += std::to_string(node) + '@';
            if (t.when == FaultTrigger::When::AtBatch)
                out += "batch:" + std::to_string(t.batch);
            else
                out += std::string("step:") + fault_op_name(t.op) + ':' + std::to_string(t.step);
        }
    }
    return out;
}

void FaultPlan::validate(const std::vector<NodeId>& members) const {
    for (const auto& [node, _] : triggers) {
        if (std::find(members.begin(), members.end(), node) == members.end())
            throw ConfigError("fault plan names unknown victim node " + std::to_string(node));
    }
}

FaultInjector::FaultInjector(const FaultPlan& plan, NodeId self, std::function<void()> kill_action)
    : kill_(std::move(kill_action)) {
    auto it = plan.triggers.find(self);
    if (it != plan.triggers.end()) mine_ = it->second;
}

void FaultInjector::on_batch(uint64_t batch) {
    for (const auto& t : mine_)
        if (t.when == FaultTrigger::When::AtBatch && t.batch == batch && kill_) kill_();
}

void FaultInjector::on_action(FaultOp op) {
    const uint64_t idx = action_counts_[op]++;
    for (const auto& t : mine_)
        if (t.when == FaultTrigger::When::AtStep && t.op == op && t.step == idx && kill_) kill_();
}

uint64_t FaultInjector::action_count(FaultOp op) const {
    auto it = action_counts_.find(op);
    return it == action_counts_.end() ? 0 : it->second;
}

}  // namespace ftdl
