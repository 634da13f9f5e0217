#include "ftdl/partition.hpp"

#include <algorithm>

namespace ftdl {

std::vector<NodeId> PartitionMap::nodes() const {
    std::vector<NodeId> ids;
    ids.reserve(assignment.size());
    for (const auto& [id, _] : assignment) ids.push_back(id);
    return ids;
}

uint64_t PartitionMap::owned_count(NodeId id) const {
    auto it = assignment.find(id);
    if (it == assignment.end()) return 0;
    uint64_t n = 0;
    for (const auto& r : it->second) n += r.size();
    return n;
}

void PartitionMap::validate() const {
    std::vector<ShardRange> all;
    for (const auto& [id, ranges] : assignment)
        for (const auto& r : ranges) {
            if (r.begin >= r.end || r.end > sample_count)
                throw Error("partition range out of bounds");
            all.push_back(r);
        }
    std::sort(all.begin(), all.end(),
              [](const ShardRange& a, const ShardRange& b) { return a.begin < b.begin; });
    uint64_t cursor = 0;
    for (const auto& r : all) {
        if (r.begin != cursor) throw Error("partition ranges overlap or leave a gap");
        cursor = r.end;
    }
    if (cursor != sample_count) throw Error("partition does not cover the sample range");
}

PartitionMap partition(uint64_t sample_count, const std::vector<NodeId>& nodes, uint64_t epoch) {
    if (nodes.empty()) throw Error("partition: empty rank list");
    if (sample_count < nodes.size()) throw Error("partition: fewer samples than ranks");
    PartitionMap pm;
    pm.epoch = epoch;
    pm.sample_count = sample_count;
    const uint64_t n = nodes.size();
    const uint64_t base = sample_count / n;
    const uint64_t extra = sample_count % n;
    uint64_t cursor = 0;
    for (uint64_t i = 0; i < n; ++i) {
        const uint64_t len = base + (i < extra ? 1 : 0);
        pm.assignment[nodes[i]] = {ShardRange{cursor, cursor + len}};
        cursor += len;
    }
    return pm;
}

std::pair<PartitionMap, ReloadPlan> repartition_after_failure(const PartitionMap& old,
                                                              const std::set<NodeId>& failed,
                                                              const std::vector<NodeId>& survivors,
                                                              uint64_t new_epoch) {
    if (survivors.empty())
        throw UnrecoverableError("repartition: no survivors remain");
    for (NodeId s : survivors)
        if (failed.count(s)) throw Error("repartition: node listed both failed and surviving");

    PartitionMap next;
    next.epoch = new_epoch;
    next.sample_count = old.sample_count;
    ReloadPlan plan;
    for (NodeId s : survivors) {
        auto it = old.assignment.find(s);
        if (it == old.assignment.end()) throw Error("repartition: survivor missing from old map");
        next.assignment[s] = it->second;  // survivors keep their shards
    }

    // collect the lost ranges in index order
    std::vector<ShardRange> lost;
    uint64_t lost_total = 0;
    for (NodeId f : failed) {
        auto it = old.assignment.find(f);
        if (it == old.assignment.end()) throw Error("repartition: failed node missing from old map");
        for (const auto& r : it->second) {
            lost.push_back(r);
            lost_total += r.size();
        }
    }
    std::sort(lost.begin(), lost.end(),
              [](const ShardRange& a, const ShardRange& b) { return a.begin < b.begin; });

    // split the lost index multiset near-evenly among survivors in id order
    std::vector<NodeId> order(survivors);
    std::sort(order.begin(), order.end());
    const uint64_t n = order.size();
    const uint64_t base = lost_total / n;
    const uint64_t extra = lost_total % n;
    size_t range_i = 0;
    uint64_t range_off = 0;
    for (uint64_t i = 0; i < n; ++i) {
        uint64_t want = base + (i < extra ? 1 : 0);
        while (want > 0) {
            const ShardRange& src = lost[range_i];
            const uint64_t avail = src.size() - range_off;
            const uint64_t take = std::min(want, avail);
            ShardRange piece{src.begin + range_off, src.begin + range_off + take};
            next.assignment[order[i]].push_back(piece);
            plan[order[i]].push_back(piece);
            want -= take;
            range_off += take;
            if (range_off == src.size()) {
                ++range_i;
                range_off = 0;
            }
        }
    }
    next.validate();
    return {std::move(next), std::move(plan)};
}

void require_epoch(const PartitionMap& pm, uint64_t comm_epoch) {
    if (pm.epoch != comm_epoch)
        throw Error("stale partition map: epoch " + std::to_string(pm.epoch) +
                    " vs communicator epoch " + std::to_string(comm_epoch));
}

}  // namespace ftdl
