#include "ftdl/analyzer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "ftdl/common.hpp"

namespace ftdl {

LayerCost count_layer(const LayerSpec& spec) {
    LayerCost cost;
    if (spec.kind == LayerSpec::Kind::Convolution) {
        if (spec.s1 == 0 || spec.s2 == 0 || spec.x1 % spec.s1 != 0 || spec.x2 % spec.s2 != 0)
            throw ConfigError("stride must divide the activation extent");
        cost.parameters = spec.w1 * spec.w2 * spec.n1 * spec.n2;
        cost.biases = spec.n2;
        cost.activations = (spec.x1 / spec.s1) * (spec.x2 / spec.s2) * spec.n2;
    } else {
        cost.parameters = spec.n1 * spec.n2;
        cost.biases = spec.n2;
        cost.activations = spec.n2;
    }
    return cost;
}

std::vector<LayerSpec> resolve_layer_specs(const Topology& topo) {
    std::vector<LayerSpec> specs;
    uint64_t x1 = topo.in_x1, x2 = topo.in_x2, c = topo.in_c;
    uint64_t features = x1 * x2 * c;
    for (const auto& line : topo.lines) {
        switch (line.kind) {
            case LayerKind::Convolution: {
                LayerSpec s;
                s.kind = LayerSpec::Kind::Convolution;
                s.n1 = c;
                s.n2 = line.n2;
                s.x1 = x1;
                s.x2 = x2;
                s.w1 = line.w1;
                s.w2 = line.w2;
                s.s1 = line.s1;
                s.s2 = line.s2;
                count_layer(s);  // validates strides
                specs.push_back(s);
                x1 /= line.s1;
                x2 /= line.s2;
                c = line.n2;
                features = x1 * x2 * c;
                break;
            }
            case LayerKind::FullyConnected: {
                LayerSpec s;
                s.kind = LayerSpec::Kind::FullyConnected;
                s.n1 = features;  // total activations of the previous layer
                s.n2 = line.n2;
                specs.push_back(s);
                features = line.n2;
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::SoftmaxXent:
                break;  // shape-preserving, no parameters
        }
    }
    return specs;
}

double ParallelismReport::model_parallel_comm() const {
    return static_cast<double>(total_activations) * static_cast<double>(batch);
}

double ParallelismReport::data_parallel_comm() const {
    return static_cast<double>(total_trainable()) * std::log2(static_cast<double>(nodes));
}

double ParallelismReport::compute_per_node() const {
    return static_cast<double>(batch) / static_cast<double>(nodes);
}

ParallelismReport compare_parallelism(const std::vector<LayerSpec>& specs, uint64_t batch,
                                      uint64_t nodes) {
    if (specs.empty()) throw ConfigError("no layers to analyze");
    if (batch < 1 || nodes < 1) throw ConfigError("batch and nodes must be >= 1");
    ParallelismReport report;
    report.batch = batch;
    report.nodes = nodes;
    for (const auto& s : specs) {
        LayerCost cost = count_layer(s);
        report.total_parameters += cost.parameters;
        report.total_biases += cost.biases;
        report.total_activations += cost.activations;
        report.layers.push_back({s, cost});
    }
    return report;
}

void print_report(std::ostream& out, const ParallelismReport& r) {
    out << "layer  kind  n1       n2      window  stride  parameters  biases  activations  dominated-by\n";
    for (size_t i = 0; i < r.layers.size(); ++i) {
        const auto& e = r.layers[i];
        const bool conv = e.spec.kind == LayerSpec::Kind::Convolution;
        out << std::left << std::setw(7) << i << std::setw(6) << (conv ? "conv" : "fc")
            << std::setw(9) << e.spec.n1 << std::setw(8) << e.spec.n2 << std::setw(8)
            << (conv ? std::to_string(e.spec.w1) + "x" + std::to_string(e.spec.w2) : "-")
            << std::setw(8)
            << (conv ? std::to_string(e.spec.s1) + "x" + std::to_string(e.spec.s2) : "-")
            << std::setw(12) << e.cost.parameters << std::setw(8) << e.cost.biases << std::setw(13)
            << e.cost.activations
            << (e.cost.parameter_dominated() ? "parameters" : "activations") << "\n";
    }
    out << "totals: parameters " << r.total_parameters << " (+" << r.total_biases
        << " biases), activations " << r.total_activations << "\n";
    out << "model-parallel comm proxy (activations x batch " << r.batch
        << "): " << r.model_parallel_comm() << "\n";
    out << "data-parallel comm proxy (trainable x log2(nodes " << r.nodes
        << ")): " << r.data_parallel_comm() << "\n";
    out << "data-parallel per-node compute proxy (batch/nodes): " << r.compute_per_node() << "\n";
}

void write_report_csv(const std::string& path, const ParallelismReport& r) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write report csv: " + path);
    f << "layer,kind,n1,n2,w1,w2,s1,s2,parameters,biases,activations\n";
    for (size_t i = 0; i < r.layers.size(); ++i) {
        const auto& e = r.layers[i];
        const bool conv = e.spec.kind == LayerSpec::Kind::Convolution;
        f << i << ',' << (conv ? "conv" : "fc") << ',' << e.spec.n1 << ',' << e.spec.n2 << ','
          << e.spec.w1 << ',' << e.spec.w2 << ',' << e.spec.s1 << ',' << e.spec.s2 << ','
          << e.cost.parameters << ',' << e.cost.biases << ',' << e.cost.activations << "\n";
    }
    f << "total,,,,,,,," << r.total_parameters << ',' << r.total_biases << ','
      << r.total_activations << "\n";
}

}  // namespace ftdl
