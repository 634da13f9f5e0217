#include "ftdl/experiment.hpp"

#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "ftdl/inproc_transport.hpp"
#include "ftdl/tcp_transport.hpp"

namespace ftdl {

const char* transport_name(TransportKind k) {
    switch (k) {
        case TransportKind::Inproc: return "inproc";
        case TransportKind::Tcp: return "tcp";
        case TransportKind::Serial: return "serial";
    }
    return "?";
}

TransportKind parse_transport(const std::string& name) {
    if (name == "inproc") return TransportKind::Inproc;
    if (name == "tcp") return TransportKind::Tcp;
    if (name == "serial") return TransportKind::Serial;
    throw ConfigError("unknown transport '" + name + "' (want inproc, tcp or serial)");
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

void ensure_dir(const std::string& path) {
    if (path.empty()) return;
    std::string prefix;
    std::istringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '/')) {
        if (part.empty()) {
            prefix += "/";
            continue;
        }
        prefix += part + "/";
        ::mkdir(prefix.c_str(), 0755);
    }
}

std::vector<WorkerResult> run_inproc_workers(const TrainConfig& cfg) {
    std::vector<NodeId> ids(cfg.nodes);
    for (uint32_t i = 0; i < cfg.nodes; ++i) ids[i] = i;
    cfg.plan.validate(ids);

    InprocNet net(ids);
    std::vector<WorkerResult> results(cfg.nodes);
    std::vector<std::thread> threads;
    threads.reserve(cfg.nodes);
    for (uint32_t i = 0; i < cfg.nodes; ++i) {
        threads.emplace_back([&, i] {
            const NodeId id = ids[i];
            Transport& tp = net.node(id);
            FaultInjector injector(cfg.plan, id, [&net, id] {
                net.kill(id);  // mailbox closes first so survivors see a dead node
                throw KilledSignal{id};
            });
            std::unique_ptr<HeartbeatService> hb;
            if (cfg.heartbeats && cfg.real_clock) {
                std::vector<NodeId> peers;
                for (NodeId p : ids)
                    if (p != id) peers.push_back(p);
                hb = std::make_unique<HeartbeatService>(tp, peers, cfg.hb_interval_ms,
                                                        cfg.hb_timeout_ms);
                hb->start();
            }
            try {
                results[i] = run_worker(cfg, tp, ids, hb.get(), &injector);
            } catch (const KilledSignal&) {
                results[i].id = id;
                results[i].killed = true;
            } catch (const std::exception& e) {
                results[i].id = id;
                results[i].aborted = true;
                results[i].abort_reason = e.what();
            }
            if (hb) hb->stop();
        });
    }
    for (auto& t : threads) t.join();
    return results;
}

// ---- multi-process (TCP) orchestration -------------------------------------

std::string own_executable() {
    char buf[4096];
    const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) throw Error("cannot resolve /proc/self/exe");
    buf[n] = 0;
    return buf;
}

/// Per-rank result files: rank<i>.csv (records + load summary) and
/// rank<i>.params. Used by the worker subcommand and read back here.
std::string rank_csv_path(const std::string& dir, NodeId id) {
    return dir + "/rank" + std::to_string(id) + ".csv";
}
std::string rank_params_path(const std::string& dir, NodeId id) {
    return dir + "/rank" + std::to_string(id) + ".params";
}

std::vector<WorkerResult> run_tcp_workers(const TrainConfig& cfg, const std::string& workdir) {
    std::vector<NodeId> ids(cfg.nodes);
    for (uint32_t i = 0; i < cfg.nodes; ++i) ids[i] = i;
    cfg.plan.validate(ids);
    ensure_dir(workdir);

    const uint16_t base_port =
        static_cast<uint16_t>(20000 + (static_cast<uint32_t>(::getpid()) * 131 + cfg.seed * 17) % 40000);
    std::vector<HostfileEntry> hosts;
    for (uint32_t i = 0; i < cfg.nodes; ++i)
        hosts.push_back({ids[i], "127.0.0.1", static_cast<uint16_t>(base_port + i)});
    const std::string hostfile = workdir + "/hostfile";
    write_hostfile(hostfile, hosts);

    const std::string exe = own_executable();
    std::vector<pid_t> pids;
    for (uint32_t i = 0; i < cfg.nodes; ++i) {
        std::vector<std::string> args = {
            exe, "worker",
            "--hostfile", hostfile,
            "--node-id", std::to_string(ids[i]),
            "--dataset", cfg.dataset_meta,
            "--topology", cfg.topology,
            "--nodes", std::to_string(cfg.nodes),
            "--batches", std::to_string(cfg.total_batches),
            "--batch-size", std::to_string(cfg.global_batch),
            "--lr", format_double(cfg.learning_rate),
            "--seed", std::to_string(cfg.seed),
            "--mode", train_mode_name(cfg.mode),
            "--out-dir", workdir,
            "--hb-interval", format_double(cfg.hb_interval_ms),
            "--hb-timeout", format_double(cfg.hb_timeout_ms),
        };
        auto vit = cfg.plan.triggers.find(ids[i]);
        if (vit != cfg.plan.triggers.end()) {
            for (const auto& t : vit->second) {
                args.push_back("--fail");
                if (t.when == FaultTrigger::When::AtBatch)
                    args.push_back(std::to_string(ids[i]) + "@batch:" + std::to_string(t.batch));
                else
                    args.push_back(std::to_string(ids[i]) + "@step:" + fault_op_name(t.op) + ":" +
                                   std::to_string(t.step));
            }
        }
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);

        const pid_t pid = ::fork();
        if (pid < 0) throw Error("fork() failed");
        if (pid == 0) {
            ::execv(exe.c_str(), argv.data());
            _exit(127);
        }
        pids.push_back(pid);
    }

    std::vector<WorkerResult> results(cfg.nodes);
    for (uint32_t i = 0; i < cfg.nodes; ++i) {
        int status = 0;
        ::waitpid(pids[i], &status, 0);
        WorkerResult& r = results[i];
        r.id = ids[i];
        const bool sigkilled = WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
        if (sigkilled) {
            r.killed = true;
            continue;
        }
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
            r.aborted = true;
            r.abort_reason = "worker exited with status " + std::to_string(status);
            continue;
        }
        RunMetrics m = read_metrics_csv(rank_csv_path(workdir, ids[i]));
        r.records = m.records;
        r.initial_load_bytes = m.summary.initial_load_bytes;
        r.initial_load_ms = m.summary.initial_load_ms;
        r.final_params = read_model_dump(rank_params_path(workdir, ids[i]));
        r.final_members.assign(1, ids[i]);  // refined by aggregation needs only
    }
    return results;
}

}  // namespace

RunOutputs run_training(const TrainConfig& cfg, TransportKind kind, const std::string& workdir) {
    cfg.validate();
    RunOutputs out;
    if (kind == TransportKind::Serial) {
        WorkerResult ref = run_reference(cfg);
        out.metrics = aggregate_results(cfg, {ref});
        out.metrics.summary.mode = "ref";
        out.final_params = ref.final_params;
        out.workers.push_back(std::move(ref));
        return out;
    }
    TrainConfig run_cfg = cfg;
    if (kind == TransportKind::Tcp) {
        run_cfg.real_clock = true;  // separate processes cannot share a virtual clock
        run_cfg.heartbeats = true;
    }
    std::vector<WorkerResult> results = kind == TransportKind::Inproc
                                            ? run_inproc_workers(run_cfg)
                                            : run_tcp_workers(run_cfg, workdir);
    // a faulted non-FT run is a terminal failure, mirroring default MPI behavior
    if (run_cfg.mode == TrainMode::Sgd) {
        for (const auto& r : results)
            if (r.aborted)
                throw Error("non-fault-tolerant run aborted: " +
                            (r.abort_reason.empty() ? "collective failure" : r.abort_reason));
    }
    out.metrics = aggregate_results(run_cfg, results);
    for (const auto& r : results) {
        if (r.killed || r.aborted) continue;
        out.final_params = r.final_params;
        break;  // results are in id order; first survivor is the lowest rank
    }
    out.workers = std::move(results);
    return out;
}

ExperimentSpec ExperimentSpec::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scenario file: " + path);
    ExperimentSpec spec;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        std::string value;
        std::getline(ss, value);
        const auto first = value.find_first_not_of(" \t");
        value = first == std::string::npos ? "" : value.substr(first);
        auto fail = [&](const std::string& msg) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + msg);
        };
        try {
            if (key == "name") spec.name = value;
            else if (key == "dataset") spec.dataset = value;
            else if (key == "topology") spec.topology = value;
            else if (key == "transport") spec.transport = parse_transport(value);
            else if (key == "mode") spec.mode = parse_train_mode(value);
            else if (key == "nodes") spec.nodes = static_cast<uint32_t>(std::stoul(value));
            else if (key == "batches") spec.batches = std::stoull(value);
            else if (key == "batch_size") spec.batch_size = std::stoull(value);
            else if (key == "lr") spec.lr = std::stod(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else if (key == "reps") spec.reps = static_cast<uint32_t>(std::stoul(value));
            else if (key == "clock") spec.real_clock = value == "real";
            else if (key == "heartbeats") spec.heartbeats = value == "on";
            else if (key == "fail") spec.fail_flags.push_back(value);
            else fail("unknown scenario key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("bad value for '" + key + "'");
        }
    }
    if (spec.reps < 1) throw ConfigError(path + ": reps must be >= 1");
    if (spec.dataset.empty() || spec.topology.empty())
        throw ConfigError(path + ": scenario needs dataset and topology");
    return spec;
}

TrainConfig ExperimentSpec::to_config(uint32_t rep) const {
    TrainConfig cfg;
    cfg.dataset_meta = dataset;
    cfg.topology = topology;
    cfg.nodes = nodes;
    cfg.total_batches = batches;
    cfg.global_batch = batch_size;
    cfg.learning_rate = lr;
    cfg.seed = seed + rep;
    cfg.mode = mode;
    cfg.plan = FaultPlan::parse(fail_flags);
    cfg.real_clock = real_clock;
    cfg.heartbeats = heartbeats;
    cfg.parallel_kernels = transport == TransportKind::Serial || nodes == 1;
    return cfg;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& outdir) {
    ensure_dir(outdir);
    ExperimentResult result;
    for (uint32_t rep = 0; rep < spec.reps; ++rep) {
        const TrainConfig cfg = spec.to_config(rep);
        const std::string repdir = outdir + "/" + spec.name + "-rep" + std::to_string(rep);
        RunOutputs out = run_training(cfg, spec.transport, repdir);
        const std::string csv = outdir + "/" + spec.name + "-rep" + std::to_string(rep) + ".csv";
        write_metrics_csv(csv, out.metrics);
        result.rep_metrics.push_back(std::move(out.metrics));
        result.rep_csv_paths.push_back(csv);
    }

    // per-batch median across repetitions
    RunMetrics agg;
    const auto& first = result.rep_metrics.front();
    for (size_t b = 0; b < first.records.size(); ++b) {
        std::vector<double> loss, compute, comm, shrink, reload;
        std::vector<double> live;
        uint32_t shrinks = 0;
        uint64_t reload_bytes = 0;
        bool complete = true;
        for (const auto& m : result.rep_metrics) {
            if (b >= m.records.size()) {
                complete = false;
                break;
            }
            const auto& r = m.records[b];
            loss.push_back(r.loss);
            compute.push_back(r.compute_ms);
            comm.push_back(r.comm_ms);
            shrink.push_back(r.shrink_ms);
            reload.push_back(r.reload_ms);
            live.push_back(r.live_nodes);
            shrinks = std::max(shrinks, r.shrink_count);
            reload_bytes = std::max(reload_bytes, r.reload_bytes);
        }
        if (!complete) break;
        BatchRecord r;
        r.batch = b;
        r.comm_epoch = first.records[b].comm_epoch;
        r.live_nodes = static_cast<uint32_t>(median(live));
        r.loss = median(loss);
        r.compute_ms = median(compute);
        r.comm_ms = median(comm);
        r.shrink_count = shrinks;
        r.shrink_ms = median(shrink);
        r.reload_bytes = reload_bytes;
        r.reload_ms = median(reload);
        agg.records.push_back(r);
    }
    agg.summary = first.summary;
    agg.summary.mode = first.summary.mode + "-median";
    agg.recompute_summary_totals();
    result.aggregate_csv_path = outdir + "/" + spec.name + "-aggregate.csv";
    write_metrics_csv(result.aggregate_csv_path, agg);

    std::vector<std::string> plot_inputs = result.rep_csv_paths;
    plot_inputs.push_back(result.aggregate_csv_path);
    write_gnuplot_script(outdir + "/" + spec.name + "-plots.gp", plot_inputs);
    return result;
}

CompareReport compare_runs(const RunMetrics& baseline, const RunMetrics& candidate,
                           double loss_tol, double time_ratio_tol) {
    CompareReport rep;
    const size_t n = std::min(baseline.records.size(), candidate.records.size());
    rep.batches_compared = n;
    std::vector<double> base_ms, cand_ms;
    for (size_t i = 0; i < n; ++i) {
        const auto& b = baseline.records[i];
        const auto& c = candidate.records[i];
        if (b.batch != c.batch) throw Error("compare: batch indices are not aligned");
        rep.loss_gaps.push_back(std::abs(b.loss - c.loss));
        rep.max_loss_gap = std::max(rep.max_loss_gap, rep.loss_gaps.back());
        base_ms.push_back(b.compute_ms + b.comm_ms + b.shrink_ms + b.reload_ms);
        cand_ms.push_back(c.compute_ms + c.comm_ms + c.shrink_ms + c.reload_ms);
    }
    rep.median_batch_ms_baseline = median(base_ms);
    rep.median_batch_ms_candidate = median(cand_ms);
    rep.time_ratio = rep.median_batch_ms_baseline > 0.0
                         ? rep.median_batch_ms_candidate / rep.median_batch_ms_baseline
                         : 1.0;
    if (loss_tol >= 0.0) rep.loss_pass = rep.max_loss_gap <= loss_tol;
    if (time_ratio_tol >= 0.0) rep.time_pass = std::abs(rep.time_ratio - 1.0) <= time_ratio_tol;
    return rep;
}

void write_compare_csv(const std::string& path, const RunMetrics& baseline,
                       const RunMetrics& candidate, const CompareReport& report) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write compare csv: " + path);
    f << "# ftdl-compare v1\n";
    f << "batch,baseline_loss,candidate_loss,loss_gap,baseline_ms,candidate_ms\n";
    for (size_t i = 0; i < report.batches_compared; ++i) {
        const auto& b = baseline.records[i];
        const auto& c = candidate.records[i];
        f << b.batch << ',' << format_double(b.loss) << ',' << format_double(c.loss) << ','
          << format_double(report.loss_gaps[i]) << ','
          << format_double(b.compute_ms + b.comm_ms + b.shrink_ms + b.reload_ms) << ','
          << format_double(c.compute_ms + c.comm_ms + c.shrink_ms + c.reload_ms) << '\n';
    }
    f << "# max_loss_gap " << format_double(report.max_loss_gap) << '\n';
    f << "# time_ratio " << format_double(report.time_ratio) << '\n';
    f << "# pass " << (report.pass() ? 1 : 0) << '\n';
}

void write_gnuplot_script(const std::string& path, const std::vector<std::string>& csv_files) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write plot script: " + path);
    auto base = [](const std::string& p) {
        const auto s = p.find_last_of('/');
        return s == std::string::npos ? p : p.substr(s + 1);
    };
    f << "set datafile separator ','\n";
    f << "set datafile commentschars '#'\n";
    f << "set key outside\n";
    f << "set term pngcairo size 1000,700\n\n";
    f << "set output 'loss.png'\n";
    f << "set xlabel 'batch'\nset ylabel 'training loss'\n";
    f << "plot";
    for (size_t i = 0; i < csv_files.size(); ++i)
        f << (i ? ", " : " ") << "'" << base(csv_files[i]) << "' using 1:4 with lines title '"
          << base(csv_files[i]) << "'";
    f << "\n\n";
    f << "set output 'batch_time.png'\n";
    f << "set ylabel 'per-batch time (ms)'\n";
    f << "plot";
    for (size_t i = 0; i < csv_files.size(); ++i)
        f << (i ? ", " : " ") << "'" << base(csv_files[i])
          << "' using 1:($5+$6+$8+$10) with lines title '" << base(csv_files[i]) << "'";
    f << "\n\n";
    f << "set output 'shrink_time.png'\n";
    f << "set ylabel 'cumulative shrink time (ms)'\n";
    f << "cum = 0\n";
    f << "plot";
    for (size_t i = 0; i < csv_files.size(); ++i)
        f << (i ? ", " : " ") << "'" << base(csv_files[i])
          << "' using 1:(cum = cum + $8, cum) with lines title '" << base(csv_files[i]) << "'";
    f << "\n\n";
    f << "set output 'dataload_time.png'\n";
    f << "set ylabel 'reload time (ms)'\n";
    f << "plot";
    for (size_t i = 0; i < csv_files.size(); ++i)
        f << (i ? ", " : " ") << "'" << base(csv_files[i]) << "' using 1:10 with impulses title '"
          << base(csv_files[i]) << "'";
    f << "\n";
}

}  // namespace ftdl
