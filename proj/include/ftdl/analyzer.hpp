#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ftdl/topology.hpp"

namespace ftdl {

/// Resolved per-layer record for counting parameters and activations.
/// n1/x1/x2 come from chaining through the topology; for a fully-connected
/// layer that follows spatial layers, n1 is the previous layer's total
/// activation count.
struct LayerSpec {
    enum class Kind { Convolution, FullyConnected };
    Kind kind;
    uint64_t n1 = 0, n2 = 0;          // features in previous / current layer
    uint64_t x1 = 0, x2 = 0;          // previous-layer activation extents (conv)
    uint64_t w1 = 0, w2 = 0;          // window (conv)
    uint64_t s1 = 1, s2 = 1;          // strides (conv)
};

struct LayerCost {
    uint64_t parameters = 0;   // weight count, biases excluded
    uint64_t biases = 0;       // reported separately
    uint64_t activations = 0;

    uint64_t trainable() const { return parameters + biases; }
    bool parameter_dominated() const { return parameters > activations; }
};

/// Closed-form parameter/activation counts:
///   conv: parameters = w1*w2*n1*n2, activations = (x1/s1)*(x2/s2)*n2
///   fc:   parameters = n1*n2,       activations = n2
LayerCost count_layer(const LayerSpec& spec);

/// Walks a topology file and emits one LayerSpec per parameterized layer
/// (relu/softmaxxent lines carry no parameters and pass shapes through).
std::vector<LayerSpec> resolve_layer_specs(const Topology& topo);

struct ParallelismReport {
    struct Entry {
        LayerSpec spec;
        LayerCost cost;
    };
    std::vector<Entry> layers;
    uint64_t total_parameters = 0;  // weights only
    uint64_t total_biases = 0;
    uint64_t total_activations = 0;
    uint64_t batch = 0;
    uint64_t nodes = 0;

    uint64_t total_trainable() const { return total_parameters + total_biases; }
    /// Model-parallel communication proxy: activations crossing node
    /// boundaries, once per sample.
    double model_parallel_comm() const;
    /// Data-parallel communication proxy: one gradient allreduce per batch.
    double data_parallel_comm() const;
    /// Per-node compute proxy under strong scaling.
    double compute_per_node() const;
};

ParallelismReport compare_parallelism(const std::vector<LayerSpec>& specs, uint64_t batch,
                                      uint64_t nodes);

void print_report(std::ostream& out, const ParallelismReport& report);
void write_report_csv(const std::string& path, const ParallelismReport& report);

}  // namespace ftdl
