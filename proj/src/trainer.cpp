#include "ftdl/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "ftdl/io_audit.hpp"
#include "ftdl/rng.hpp"

namespace ftdl {

namespace {

constexpr double kSampleComputeMs = 0.02;  // modeled cost per sample (virtual clock)
constexpr double kReloadMsPerByte = 1e-6;  // modeled readback cost (virtual clock)

/// Node-local sample store, keyed by global sample index. Rows arrive from
/// the initial shard load and from failure-time reloads.
class SampleStore {
  public:
    SampleStore(const DatasetMeta& meta) : feat_(meta.sample_features()) {
        shape_.push_back(0);
        for (uint64_t d : meta.sample_shape) shape_.push_back(static_cast<size_t>(d));
    }

    void absorb(const LoadedRanges& loaded) {
        uint64_t row = rows_;
        for (const auto& r : loaded.ranges)
            for (uint64_t idx = r.begin; idx < r.end; ++idx) index_[idx] = row++;
        data_.insert(data_.end(), loaded.samples.data.begin(), loaded.samples.data.end());
        labels_.insert(labels_.end(), loaded.labels.begin(), loaded.labels.end());
        rows_ = row;
    }

    std::pair<Tensor, std::vector<uint32_t>> gather(const std::vector<uint64_t>& ids) const {
        std::vector<size_t> shape = shape_;
        shape[0] = ids.size();
        Tensor x(shape);
        std::vector<uint32_t> y(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) {
            auto it = index_.find(ids[i]);
            if (it == index_.end())
                throw Error("sample " + std::to_string(ids[i]) + " not resident on this node");
            std::memcpy(x.data.data() + i * feat_, data_.data() + it->second * feat_,
                        feat_ * sizeof(double));
            y[i] = labels_[it->second];
        }
        return {std::move(x), std::move(y)};
    }

  private:
    size_t feat_;
    std::vector<size_t> shape_;
    uint64_t rows_ = 0;
    std::vector<double> data_;
    std::vector<uint32_t> labels_;
    std::unordered_map<uint64_t, uint64_t> index_;
};

std::vector<ShardRange> owned_ranges(const PartitionMap& pm, NodeId id) {
    auto it = pm.assignment.find(id);
    if (it == pm.assignment.end()) return {};
    return it->second;
}

}  // namespace

const char* train_mode_name(TrainMode m) { return m == TrainMode::Sgd ? "sgd" : "ftsgd"; }

TrainMode parse_train_mode(const std::string& name) {
    if (name == "sgd") return TrainMode::Sgd;
    if (name == "ftsgd" || name == "ft-sgd") return TrainMode::FtSgd;
    throw ConfigError("unknown training mode '" + name + "' (want sgd or ftsgd)");
}

void TrainConfig::validate() const {
    if (nodes < 1) throw ConfigError("need at least one node");
    if (global_batch < nodes)
        throw ConfigError("global batch must be >= node count (strong scaling needs >= 1 sample per node)");
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    if (total_batches == 0) throw ConfigError("total batches must be positive");
    if (dataset_meta.empty() || topology.empty())
        throw ConfigError("dataset and topology paths are required");
}

ShardSampler::ShardSampler(uint64_t run_seed, NodeId node) : run_seed_(run_seed), node_(node) {}

void ShardSampler::reset(const std::vector<ShardRange>& owned, uint32_t comm_epoch) {
    ids_.clear();
    for (const auto& r : owned)
        for (uint64_t i = r.begin; i < r.end; ++i) ids_.push_back(i);
    epoch_ = comm_epoch;
    pass_ = 0;
    pos_ = 0;
    reshuffle();
}

void ShardSampler::reshuffle() {
    SplitMix64 rng(derive_seed(run_seed_, epoch_, node_, pass_));
    shuffle(ids_, rng);
    pos_ = 0;
}

std::vector<uint64_t> ShardSampler::next(uint64_t count) {
    if (ids_.empty()) throw Error("sampler has no resident shard");
    std::vector<uint64_t> out;
    out.reserve(count);
    while (out.size() < count) {
        if (pos_ == ids_.size()) {
            ++pass_;
            reshuffle();
        }
        out.push_back(ids_[pos_++]);
    }
    return out;
}

WorkerResult run_worker(const TrainConfig& cfg, Transport& transport,
                        const std::vector<NodeId>& members, HeartbeatService* heartbeat,
                        FaultInjector* injector) {
    cfg.validate();
    kernels::set_mode(cfg.parallel_kernels ? kernels::Mode::Parallel : kernels::Mode::Serial);
    const NodeId self = transport.self();
    const RunClock clock{cfg.real_clock};

    WorkerResult res;
    res.id = self;

    Network net = load_network(cfg.topology, cfg.seed);  // identical replica on every rank
    const DatasetMeta meta = load_dataset_meta(cfg.dataset_meta);
    Communicator comm(transport, members, clock, cfg.comm, heartbeat, injector);

    PartitionMap pm = partition(meta.sample_count, members, comm.epoch());
    SampleStore store(meta);
    {
        LoadedRanges initial = load_ranges(meta, owned_ranges(pm, self));
        res.initial_load_bytes = initial.payload_bytes;
        res.initial_load_ms =
            clock.real ? initial.wall_ms
                       : static_cast<double>(initial.payload_bytes) * kReloadMsPerByte;
        store.absorb(initial);
    }
    ShardSampler sampler(cfg.seed, self);
    sampler.reset(owned_ranges(pm, self), comm.epoch());

    const uint64_t slice = cfg.slice();

    for (uint64_t batch = 0; batch < cfg.total_batches; ++batch) {
        BatchRecord rec;
        rec.batch = batch;
        require_epoch(pm, comm.epoch());  // a stale pre-shrink map must never drive sampling

        // local forward/backward on this rank's slice
        const auto tc0 = RunClock::now();
        const auto ids = sampler.next(slice);
        auto [x, yids] = store.gather(ids);
        const Tensor y = one_hot(yids, net.class_count());
        net.forward(x);
        auto [local_loss, grad] = net.backward(y);
        rec.compute_ms = clock.elapsed_or(tc0, static_cast<double>(slice) * kSampleComputeMs);

        // the fault plan fires between compute and synchronization
        if (injector) injector->on_batch(batch);

        // gradient synchronization; the local mean loss rides along in the
        // reduce vector so every rank logs the global batch loss
        grad.push_back(local_loss);
        uint32_t divisor = 0;
        std::vector<double> reduced;
        const auto ts0 = RunClock::now();
        if (cfg.mode == TrainMode::Sgd) {
            auto out = comm.allreduce_sum(grad);
            if (!out.ok()) {
                std::string who;
                for (NodeId s : out.suspected) who += " " + std::to_string(s);
                throw Error("collective failed (suspected:" + who + "); non-FT mode aborts");
            }
            reduced = std::move(*out.value);
            divisor = comm.size();
            rec.comm_ms = clock.elapsed_or(ts0, comm.modeled_allreduce_ms(grad.size()));
        } else {
            auto r = comm.allreduce_until_success(grad);
            reduced = std::move(r.value);
            divisor = r.divisor;
            rec.shrink_count = r.shrink_count;
            rec.shrink_ms = r.shrink_ms;
            rec.comm_ms = clock.elapsed_or(ts0, r.modeled_comm_ms) - (clock.real ? r.shrink_ms : 0.0);
            if (rec.comm_ms < 0.0) rec.comm_ms = 0.0;
        }

        const double global_loss = reduced.back() / divisor;
        reduced.pop_back();
        for (double& g : reduced) g /= divisor;
        net.apply_update(reduced, cfg.learning_rate);
        rec.loss = global_loss;

        // after a shrink: repartition and read back only the lost shards
        if (pm.epoch != comm.epoch()) {
            std::set<NodeId> failed;
            for (NodeId n : pm.nodes())
                if (std::find(comm.members().begin(), comm.members().end(), n) ==
                    comm.members().end())
                    failed.insert(n);
            auto [pm2, plan] = repartition_after_failure(pm, failed, comm.members(), comm.epoch());
            auto mine = plan.find(self);
            if (mine != plan.end() && !mine->second.empty()) {
                LoadedRanges reload = load_ranges(meta, mine->second);
                rec.reload_bytes = reload.payload_bytes;
                rec.reload_ms =
                    clock.real ? reload.wall_ms
                               : static_cast<double>(reload.payload_bytes) * kReloadMsPerByte;
                store.absorb(reload);
            }
            pm = std::move(pm2);
            sampler.reset(owned_ranges(pm, self), comm.epoch());
        }

        rec.comm_epoch = comm.epoch();
        rec.live_nodes = comm.size();
        res.records.push_back(rec);
    }

    res.final_params = net.parameter_vector();
    res.final_epoch = comm.epoch();
    res.final_members = comm.members();
    return res;
}

WorkerResult run_reference(const TrainConfig& cfg) {
    cfg.validate();
    if (!cfg.plan.empty()) throw ConfigError("the serial reference cannot run a fault plan");
    kernels::set_mode(cfg.parallel_kernels ? kernels::Mode::Parallel : kernels::Mode::Serial);
    const RunClock clock{cfg.real_clock};

    WorkerResult res;
    res.id = 0;

    Network net = load_network(cfg.topology, cfg.seed);
    const DatasetMeta meta = load_dataset_meta(cfg.dataset_meta);

    std::vector<NodeId> virtual_nodes(cfg.nodes);
    for (uint32_t i = 0; i < cfg.nodes; ++i) virtual_nodes[i] = i;
    PartitionMap pm = partition(meta.sample_count, virtual_nodes, 0);

    SampleStore store(meta);
    {
        LoadedRanges full = load_ranges(meta, {{0, meta.sample_count}});
        res.initial_load_bytes = full.payload_bytes;
        res.initial_load_ms = clock.real
                                  ? full.wall_ms
                                  : static_cast<double>(full.payload_bytes) * kReloadMsPerByte;
        store.absorb(full);
    }

    std::vector<ShardSampler> samplers;
    for (NodeId n : virtual_nodes) {
        samplers.emplace_back(cfg.seed, n);
        samplers.back().reset(owned_ranges(pm, n), 0);
    }

    const uint64_t slice = cfg.slice();
    for (uint64_t batch = 0; batch < cfg.total_batches; ++batch) {
        BatchRecord rec;
        rec.batch = batch;
        const auto tc0 = RunClock::now();
        std::vector<uint64_t> ids;
        ids.reserve(slice * cfg.nodes);
        for (auto& s : samplers) {
            auto part = s.next(slice);
            ids.insert(ids.end(), part.begin(), part.end());
        }
        auto [x, yids] = store.gather(ids);
        const Tensor y = one_hot(yids, net.class_count());
        net.forward(x);
        auto [loss, grad] = net.backward(y);
        net.apply_update(grad, cfg.learning_rate);
        rec.compute_ms =
            clock.elapsed_or(tc0, static_cast<double>(slice * cfg.nodes) * kSampleComputeMs);
        rec.loss = loss;
        rec.live_nodes = cfg.nodes;
        res.records.push_back(rec);
    }
    res.final_params = net.parameter_vector();
    res.final_members = virtual_nodes;
    return res;
}

RunMetrics aggregate_results(const TrainConfig& cfg, const std::vector<WorkerResult>& results) {
    const WorkerResult* rep = nullptr;
    for (const auto& r : results) {
        if (r.killed || r.aborted) continue;
        if (!rep || r.id < rep->id) rep = &r;
    }
    if (!rep) throw Error("no surviving worker produced metrics");

    RunMetrics m;
    m.records = rep->records;
    m.summary.mode = cfg.mode == TrainMode::Sgd ? "sgd" : "ftsgd";
    m.summary.seed = cfg.seed;
    for (const auto& r : results) {
        if (r.killed || r.aborted) continue;
        m.summary.initial_load_bytes += r.initial_load_bytes;
        m.summary.initial_load_ms += r.initial_load_ms;
        for (const auto& rec : r.records) {
            m.summary.reload_bytes += rec.reload_bytes;
            m.summary.reload_ms += rec.reload_ms;
        }
    }
    m.recompute_summary_totals();
    m.validate();
    return m;
}

void write_model_dump(const std::string& path, const FlatVector& params) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write model dump: " + path);
    const uint32_t magic = 0x444D5446;  // "FTMD"
    const uint32_t version = 1;
    const uint64_t count = params.size();
    f.write(reinterpret_cast<const char*>(&magic), 4);
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&count), 8);
    f.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * 8));
    if (!f) throw IoError("short write to model dump: " + path);
    io_audit::record_write("model", path, 16 + params.size() * 8);
}

FlatVector read_model_dump(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open model dump: " + path);
    uint32_t magic = 0, version = 0;
    uint64_t count = 0;
    f.read(reinterpret_cast<char*>(&magic), 4);
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&count), 8);
    if (!f || magic != 0x444D5446 || version != 1)
        throw IoError("corrupt header: not a model dump: " + path);
    FlatVector params(count);
    f.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * 8));
    if (!f) throw IoError("short read of model dump: " + path);
    return params;
}

}  // namespace ftdl
