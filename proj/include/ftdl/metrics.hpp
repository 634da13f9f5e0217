#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ftdl {

/// One row per batch, mirroring the run's figure families: loss curve,
/// per-batch time split, shrink cost and partial-readback cost.
struct BatchRecord {
    uint64_t batch = 0;
    uint32_t comm_epoch = 0;
    uint32_t live_nodes = 0;
    double loss = 0.0;
    double compute_ms = 0.0;
    double comm_ms = 0.0;
    uint32_t shrink_count = 0;
    double shrink_ms = 0.0;
    uint64_t reload_bytes = 0;
    double reload_ms = 0.0;
};

struct RunSummary {
    std::string mode;  // sgd | ftsgd | ref
    uint32_t nodes_start = 0;
    uint32_t nodes_end = 0;
    uint64_t seed = 0;
    uint64_t total_batches = 0;
    double total_ms = 0.0;  // sum of per-batch accounted time
    uint32_t total_shrinks = 0;
    double total_shrink_ms = 0.0;
    uint64_t initial_load_bytes = 0;
    double initial_load_ms = 0.0;
    uint64_t reload_bytes = 0;
    double reload_ms = 0.0;
};

struct RunMetrics {
    std::vector<BatchRecord> records;
    RunSummary summary;

    /// Enforces the record invariants (live-node count non-increasing,
    /// shrink time only on batches that shrank) and recomputes aggregates.
    void validate() const;
    void recompute_summary_totals();
};

/// CSV with a versioned header line, one row per batch and the summary as
/// trailing '# key value' comments. Doubles are printed with %.17g so a file
/// is byte-identical for identical runs and round-trips exactly.
void write_metrics_csv(const std::string& path, const RunMetrics& metrics);
RunMetrics read_metrics_csv(const std::string& path);

std::string format_double(double v);

}  // namespace ftdl
