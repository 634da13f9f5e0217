#pragma once

#include <optional>
#include <string>

#include "ftdl/collective.hpp"
#include "ftdl/dataset.hpp"
#include "ftdl/fault.hpp"
#include "ftdl/metrics.hpp"
#include "ftdl/network.hpp"
#include "ftdl/partition.hpp"

namespace ftdl {

enum class TrainMode { Sgd, FtSgd };

const char* train_mode_name(TrainMode m);
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
    std::string dataset_meta;  // dataset json path
    std::string topology;      // layer-spec file path
    uint32_t nodes = 1;
    uint64_t total_batches = 100;
    uint64_t global_batch = 32;  // strong scaling: each node computes global_batch/nodes
    double learning_rate = 0.05;
    uint64_t seed = 1;
    TrainMode mode = TrainMode::FtSgd;
    FaultPlan plan;
    bool real_clock = false;  // virtual (deterministic) by default
    bool parallel_kernels = false;
    bool heartbeats = false;  // real-clock runs only
    double hb_interval_ms = 100.0;
    double hb_timeout_ms = 500.0;
    CommConfig comm;

    uint64_t slice() const { return global_batch / nodes; }
    void validate() const;
};

struct WorkerResult {
    NodeId id = 0;
    bool killed = false;
    bool aborted = false;
    std::string abort_reason;
    std::vector<BatchRecord> records;
    FlatVector final_params;
    uint32_t final_epoch = 0;
    std::vector<NodeId> final_members;
    uint64_t initial_load_bytes = 0;
    double initial_load_ms = 0.0;
};

/// Deterministic per-rank batch index stream: the rank's owned shard indices
/// are shuffled with a seed derived from (run seed, communicator epoch, node
/// id, pass) and consumed in slices. Every survivor rebuilds an identical
/// stream after a repartition without any coordination message.
class ShardSampler {
  public:
    ShardSampler(uint64_t run_seed, NodeId node);
    void reset(const std::vector<ShardRange>& owned, uint32_t comm_epoch);
    std::vector<uint64_t> next(uint64_t count);

  private:
    void reshuffle();
    uint64_t run_seed_;
    NodeId node_;
    uint32_t epoch_ = 0;
    uint64_t pass_ = 0;
    size_t pos_ = 0;
    std::vector<uint64_t> ids_;
};

/// The per-node solver loop: local forward/backward on this rank's slice,
/// gradient averaging through the collective layer (plain or fault-tolerant),
/// apply, repeat — with shrink recovery and partial shard readback in FT mode.
WorkerResult run_worker(const TrainConfig& cfg, Transport& transport,
                        const std::vector<NodeId>& members, HeartbeatService* heartbeat,
                        FaultInjector* injector);

/// Serial reference: one process composes each global batch exactly as the
/// n ranks would (same partition, same per-rank streams, rank-major order)
/// and takes a full-batch step. Used as the equivalence oracle for the
/// distributed path.
WorkerResult run_reference(const TrainConfig& cfg);

/// Picks per-batch rows from the lowest surviving rank and sums load totals
/// over survivors.
RunMetrics aggregate_results(const TrainConfig& cfg, const std::vector<WorkerResult>& results);

/// Final-model dump: 16-byte header (magic 'FTMD', version, count) + raw
/// little-endian doubles.
void write_model_dump(const std::string& path, const FlatVector& params);
FlatVector read_model_dump(const std::string& path);

}  // namespace ftdl
