#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ftdl/kernels.hpp"
#include "ftdl/tensor.hpp"
#include "ftdl/topology.hpp"

namespace ftdl {

/// Flat parameter / gradient layout: layer-major, weights before biases.
/// Layout is a pure function of the topology, so every replica of a model
/// agrees on it.
using FlatVector = std::vector<double>;

struct LayerParams {
    LayerKind kind;
    Tensor W;  // fc: [n2, n1]; conv: [w1, w2, n1, n2]; empty otherwise
    Tensor b;  // [n2]
    kernels::ConvGeom geom{};  // conv only
    size_t in_features = 0;
    size_t out_features = 0;

    size_t param_count() const { return W.size() + b.size(); }
};

/// Ordered layer stack with cached forward state. Confined to one worker;
/// replicas are synchronized only through explicit parameter vectors.
class Network {
  public:
    Network(const Topology& topo, uint64_t seed);

    /// Runs the batch through all layers, caching per-layer inputs for the
    /// backward pass. Returns final-layer activations (class probabilities
    /// when the net ends in softmaxxent).
    const Tensor& forward(const Tensor& batch);

    /// Mean cross-entropy of the cached predictions against one-hot labels.
    double loss(const Tensor& labels) const;

    /// Backpropagates from the loss layer; returns (loss, batch-mean gradient).
    std::pair<double, FlatVector> backward(const Tensor& labels);

    /// theta <- theta - lr * grad
    void apply_update(const FlatVector& grad, double lr);

    FlatVector parameter_vector() const;
    void load_parameter_vector(const FlatVector& v);
    size_t parameter_count() const { return param_count_; }

    size_t class_count() const { return class_count_; }
    size_t input_features() const { return input_features_; }
    const std::vector<LayerParams>& layers() const { return layers_; }

    /// Direct mutable access to a parameter value by flat index (used by
    /// finite-difference checks).
    double get_param(size_t flat_index) const;
    void set_param(size_t flat_index, double value);

  private:
    std::vector<LayerParams> layers_;
    std::vector<size_t> offsets_;  // flat offset of each layer's W block
    size_t param_count_ = 0;
    size_t class_count_ = 0;
    size_t input_features_ = 0;

    // forward caches: acts_[l] is the input of layer l, acts_.back() the output
    std::vector<Tensor> acts_;
    std::vector<std::vector<double>> conv_cols_;  // im2col cache per layer
    bool forward_done_ = false;
};

/// Builds a network directly from a topology file path.
Network load_network(const std::string& topology_path, uint64_t seed);

/// One-hot encodes integer class labels.
Tensor one_hot(const std::vector<uint32_t>& labels, size_t class_count);

}  // namespace ftdl
