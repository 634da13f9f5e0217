#pragma once

#include <string>
#include <vector>

#include "ftdl/metrics.hpp"
#include "ftdl/trainer.hpp"

namespace ftdl {

enum class TransportKind { Inproc, Tcp, Serial };

const char* transport_name(TransportKind k);
TransportKind parse_transport(const std::string& name);

struct RunOutputs {
    RunMetrics metrics;
    FlatVector final_params;  // from the lowest surviving rank
    std::vector<WorkerResult> workers;
};

/// Runs one training job on the chosen transport and aggregates the result.
/// `workdir` holds scratch files for multi-process runs (hostfile, per-rank
/// outputs); it is created if missing.
RunOutputs run_training(const TrainConfig& cfg, TransportKind kind, const std::string& workdir);

/// Named scenario, parsed from a flat key-value text file (one `key value`
/// pair per line, '#' comments, `fail` repeatable).
struct ExperimentSpec {
    std::string name = "run";
    std::string dataset;
    std::string topology;
    TransportKind transport = TransportKind::Inproc;
    TrainMode mode = TrainMode::FtSgd;
    uint32_t nodes = 4;
    uint64_t batches = 100;
    uint64_t batch_size = 32;
    double lr = 0.05;
    uint64_t seed = 1;
    uint32_t reps = 1;
    bool real_clock = false;
    bool heartbeats = false;
    std::vector<std::string> fail_flags;

    static ExperimentSpec parse_file(const std::string& path);
    TrainConfig to_config(uint32_t rep) const;
};

struct ExperimentResult {
    std::vector<RunMetrics> rep_metrics;
    std::vector<std::string> rep_csv_paths;
    std::string aggregate_csv_path;
};

/// Runs every repetition (seed + rep), writes one CSV per rep, a per-batch
/// median aggregate, and a gnuplot script for the figure families.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& outdir);

struct CompareReport {
    size_t batches_compared = 0;
    double max_loss_gap = 0.0;
    double median_batch_ms_baseline = 0.0;
    double median_batch_ms_candidate = 0.0;
    double time_ratio = 1.0;  // candidate / baseline median per-batch time
    bool loss_pass = true;
    bool time_pass = true;
    std::vector<double> loss_gaps;

    bool pass() const { return loss_pass && time_pass; }
};

/// Aligns the two runs on batch index and reports loss gaps and the
/// per-batch time ratio. Negative tolerances disable the respective check.
CompareReport compare_runs(const RunMetrics& baseline, const RunMetrics& candidate,
                           double loss_tol, double time_ratio_tol);
void write_compare_csv(const std::string& path, const RunMetrics& baseline,
                       const RunMetrics& candidate, const CompareReport& report);

void write_gnuplot_script(const std::string& path, const std::vector<std::string>& csv_files);

double median(std::vector<double> values);

}  // namespace ftdl
