// ftdl: fault-tolerant data-parallel SGD sandbox.
// Subcommands: mkdata, analyze, train, experiment, compare, worker.
// Exit codes: 0 success, 1 tolerance check failed, 2 infrastructure error.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "ftdl/analyzer.hpp"
#include "ftdl/dataset.hpp"
#include "ftdl/experiment.hpp"
#include "ftdl/tcp_transport.hpp"
#include "ftdl/trainer.hpp"

using namespace ftdl;

namespace {

int cmd_mkdata(const std::string& out, SynthOptions opts) {
    DatasetMeta meta = make_synthetic_dataset(out, opts);
    std::cout << "dataset: " << out << ".json (" << meta.sample_count << " samples, "
              << meta.class_count << " classes, format " << meta.format << ")\n";
    return 0;
}

int cmd_analyze(const std::string& topology, uint64_t batch, uint64_t nodes,
                const std::string& csv) {
    Topology topo = parse_topology_file(topology);
    auto specs = resolve_layer_specs(topo);
    auto report = compare_parallelism(specs, batch, nodes);
    print_report(std::cout, report);
    if (!csv.empty()) {
        write_report_csv(csv, report);
        std::cout << "wrote " << csv << "\n";
    }
    return 0;
}

struct TrainFlags {
    TrainConfig cfg;
    std::string transport = "inproc";
    std::string mode = "ftsgd";
    std::string clock = "virtual";
    std::vector<std::string> fail;
    std::string out_csv = "train-metrics.csv";
    std::string out_model = "model.bin";
    std::string workdir = "ftdl-work";
};

void add_train_options(CLI::App* app, TrainFlags& f) {
    app->add_option("--dataset", f.cfg.dataset_meta, "dataset meta json")->required();
    app->add_option("--topology", f.cfg.topology, "layer-spec file")->required();
    app->add_option("--nodes", f.cfg.nodes, "simulated compute nodes");
    app->add_option("--batches", f.cfg.total_batches, "batch updates to run");
    app->add_option("--batch-size", f.cfg.global_batch, "global batch size b (b/n per node)");
    app->add_option("--lr", f.cfg.learning_rate, "learning rate");
    app->add_option("--seed", f.cfg.seed, "run seed");
    app->add_option("--mode", f.mode, "sgd | ftsgd");
    app->add_option("--fail", f.fail, "fault triggers: <node>@batch:<k> or <node>@step:<op>:<i>");
    app->add_option("--clock", f.clock, "virtual (deterministic) | real (measured)");
    app->add_flag("--heartbeats", f.cfg.heartbeats, "run the heartbeat failure detector");
    app->add_option("--hb-interval", f.cfg.hb_interval_ms, "heartbeat interval ms");
    app->add_option("--hb-timeout", f.cfg.hb_timeout_ms, "heartbeat suspicion timeout ms");
    app->add_flag("--parallel-kernels", f.cfg.parallel_kernels, "OpenMP kernels inside each worker");
}

int cmd_train(TrainFlags& f) {
    f.cfg.mode = parse_train_mode(f.mode);
    f.cfg.plan = FaultPlan::parse(f.fail);
    f.cfg.real_clock = f.clock == "real";
    const TransportKind kind = parse_transport(f.transport);
    RunOutputs out = run_training(f.cfg, kind, f.workdir);
    write_metrics_csv(f.out_csv, out.metrics);
    if (!out.final_params.empty()) write_model_dump(f.out_model, out.final_params);
    const auto& s = out.metrics.summary;
    std::cout << "mode " << s.mode << ", nodes " << s.nodes_start << " -> " << s.nodes_end
              << ", batches " << s.total_batches << ", final loss "
              << (out.metrics.records.empty() ? 0.0 : out.metrics.records.back().loss)
              << ", shrinks " << s.total_shrinks << "\n";
    std::cout << "wrote " << f.out_csv << " and " << f.out_model << "\n";
    return 0;
}

int cmd_worker(const std::string& hostfile, NodeId node_id, TrainFlags& f) {
    ::signal(SIGPIPE, SIG_IGN);
    f.cfg.mode = parse_train_mode(f.mode);
    f.cfg.plan = FaultPlan::parse(f.fail);
    f.cfg.real_clock = true;
    f.cfg.heartbeats = true;

    auto hosts = parse_hostfile(hostfile);
    std::vector<NodeId> members;
    for (const auto& h : hosts) members.push_back(h.id);
    TcpTransport transport(node_id, hosts);
    std::vector<NodeId> peers;
    for (NodeId m : members)
        if (m != node_id) peers.push_back(m);
    HeartbeatService hb(transport, peers, f.cfg.hb_interval_ms, f.cfg.hb_timeout_ms);
    hb.start();
    FaultInjector injector(f.cfg.plan, node_id, [] { ::raise(SIGKILL); });

    WorkerResult res = run_worker(f.cfg, transport, members, &hb, &injector);
    hb.stop();

    RunMetrics m;
    m.records = res.records;
    m.summary.mode = train_mode_name(f.cfg.mode);
    m.summary.seed = f.cfg.seed;
    m.summary.initial_load_bytes = res.initial_load_bytes;
    m.summary.initial_load_ms = res.initial_load_ms;
    m.recompute_summary_totals();
    write_metrics_csv(f.workdir + "/rank" + std::to_string(node_id) + ".csv", m);
    write_model_dump(f.workdir + "/rank" + std::to_string(node_id) + ".params", res.final_params);
    return 0;
}

int cmd_experiment(const std::string& scenario, const std::string& outdir) {
    ExperimentSpec spec = ExperimentSpec::parse_file(scenario);
    ExperimentResult result = run_experiment(spec, outdir);
    for (const auto& p : result.rep_csv_paths) std::cout << "wrote " << p << "\n";
    std::cout << "wrote " << result.aggregate_csv_path << "\n";
    return 0;
}

int cmd_compare(const std::string& base, const std::string& cand, double loss_tol,
                double time_tol, const std::string& csv) {
    RunMetrics baseline = read_metrics_csv(base);
    RunMetrics candidate = read_metrics_csv(cand);
    CompareReport rep = compare_runs(baseline, candidate, loss_tol, time_tol);
    if (!csv.empty()) write_compare_csv(csv, baseline, candidate, rep);
    std::cout << "batches compared: " << rep.batches_compared << "\n";
    std::cout << "max loss gap: " << format_double(rep.max_loss_gap)
              << (loss_tol >= 0 ? (rep.loss_pass ? "  (pass)" : "  (FAIL)") : "") << "\n";
    std::cout << "median per-batch ms: baseline " << format_double(rep.median_batch_ms_baseline)
              << ", candidate " << format_double(rep.median_batch_ms_candidate) << ", ratio "
              << format_double(rep.time_ratio)
              << (time_tol >= 0 ? (rep.time_pass ? "  (pass)" : "  (FAIL)") : "") << "\n";
    return rep.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fault-tolerant data-parallel SGD sandbox"};
    app.require_subcommand(1);

    // mkdata
    auto* mk = app.add_subcommand("mkdata", "generate a seeded synthetic dataset");
    std::string mk_out = "synth";
    SynthOptions mk_opts;
    mk->add_option("--out", mk_out, "output prefix")->required();
    mk->add_option("--samples", mk_opts.sample_count);
    mk->add_option("--classes", mk_opts.class_count);
    mk->add_option("--x1", mk_opts.x1);
    mk->add_option("--x2", mk_opts.x2);
    mk->add_option("--channels", mk_opts.channels);
    mk->add_option("--seed", mk_opts.seed);
    mk->add_option("--noise", mk_opts.noise);
    mk->add_option("--format", mk_opts.format, "idx | raw");

    // analyze
    auto* an = app.add_subcommand("analyze", "per-layer parameter/activation counts");
    std::string an_topo, an_csv;
    uint64_t an_batch = 256, an_nodes = 4;
    an->add_option("--topology", an_topo, "layer-spec file")->required();
    an->add_option("--batch", an_batch, "batch size for the communication proxies");
    an->add_option("--nodes", an_nodes, "node count for the communication proxies");
    an->add_option("--csv", an_csv, "also write the table as csv");

    // train
    auto* tr = app.add_subcommand("train", "run data-parallel training");
    TrainFlags tf;
    add_train_options(tr, tf);
    tr->add_option("--transport", tf.transport, "inproc | tcp | serial");
    tr->add_option("--out", tf.out_csv, "metrics csv path");
    tr->add_option("--model", tf.out_model, "final model dump path");
    tr->add_option("--workdir", tf.workdir, "scratch dir for tcp runs");

    // worker (spawned by tcp runs)
    auto* wk = app.add_subcommand("worker", "internal: one tcp training rank");
    TrainFlags wf;
    std::string wk_hostfile;
    NodeId wk_id = 0;
    add_train_options(wk, wf);
    wk->add_option("--hostfile", wk_hostfile)->required();
    wk->add_option("--node-id", wk_id)->required();
    wk->add_option("--out-dir", wf.workdir)->required();

    // experiment
    auto* ex = app.add_subcommand("experiment", "run a scenario file");
    std::string ex_scenario, ex_out = "experiments";
    ex->add_option("scenario", ex_scenario, "scenario key-value file")->required();
    ex->add_option("--out", ex_out, "output directory");

    // compare
    auto* cp = app.add_subcommand("compare", "compare two metrics csv files");
    std::string cp_base, cp_cand, cp_csv;
    double cp_loss_tol = -1.0, cp_time_tol = -1.0;
    cp->add_option("baseline", cp_base)->required();
    cp->add_option("candidate", cp_cand)->required();
    cp->add_option("--loss-tol", cp_loss_tol, "max per-batch loss gap (-1 disables)");
    cp->add_option("--time-tol", cp_time_tol, "max |ratio-1| of median batch time (-1 disables)");
    cp->add_option("--csv", cp_csv, "write the gap series");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mk->parsed()) return cmd_mkdata(mk_out, mk_opts);
        if (an->parsed()) return cmd_analyze(an_topo, an_batch, an_nodes, an_csv);
        if (tr->parsed()) return cmd_train(tf);
        if (wk->parsed()) return cmd_worker(wk_hostfile, wk_id, wf);
        if (ex->parsed()) return cmd_experiment(ex_scenario, ex_out);
        if (cp->parsed()) return cmd_compare(cp_base, cp_cand, cp_loss_tol, cp_time_tol, cp_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
