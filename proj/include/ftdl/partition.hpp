#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "ftdl/common.hpp"

namespace ftdl {

/// Half-open range of dataset sample indices owned by one rank.
struct ShardRange {
    uint64_t begin = 0;
    uint64_t end = 0;  // exclusive

    uint64_t size() const { return end - begin; }
    bool operator==(const ShardRange&) const = default;
};

/// Assignment of shard ranges to live node ids, tagged with the communicator
/// epoch it was computed for. Invariants: ranges are pairwise disjoint and
/// cover [0, sample_count) exactly. Every survivor computes the same map from
/// the same inputs, so no coordination beyond the shrink itself is needed.
struct PartitionMap {
    uint64_t epoch = 0;
    uint64_t sample_count = 0;
    std::map<NodeId, std::vector<ShardRange>> assignment;

    std::vector<NodeId> nodes() const;
    uint64_t owned_count(NodeId id) const;
    /// Throws Error if disjointness or full cover is violated.
    void validate() const;
};

/// rank -> ranges each survivor must newly read after a failure.
using ReloadPlan = std::map<NodeId, std::vector<ShardRange>>;

/// Contiguous near-equal split of [0, sample_count) over the given nodes
/// (sizes differ by at most one, larger shards first).
PartitionMap partition(uint64_t sample_count, const std::vector<NodeId>& nodes,
                       uint64_t epoch = 0);

/// Survivors keep their ranges; the failed nodes' ranges are split near-evenly
/// among survivors in node-id order. The reload plan holds exactly the ranges
/// each survivor must newly read.
std::pair<PartitionMap, ReloadPlan> repartition_after_failure(const PartitionMap& old,
                                                              const std::set<NodeId>& failed,
                                                              const std::vector<NodeId>& survivors,
                                                              uint64_t new_epoch);

/// Split-brain guard: a map computed for another communicator epoch must not
/// drive sampling or shard ownership.
void require_epoch(const PartitionMap& pm, uint64_t comm_epoch);

}  // namespace ftdl
