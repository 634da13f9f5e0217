#include "ftdl/network.hpp"

#include <cmath>

#include "ftdl/rng.hpp"

namespace ftdl {

namespace {

void init_uniform(Tensor& t, uint64_t seed, size_t n1, size_t n2) {
    SplitMix64 rng(seed);
    const double a = std::sqrt(6.0 / static_cast<double>(n1 + n2));
    for (double& v : t.data) v = rng.next_symmetric(a);
}

}  // namespace

Network::Network(const Topology& topo, uint64_t seed) {
    size_t x1 = topo.in_x1, x2 = topo.in_x2, c = topo.in_c;
    size_t features = x1 * x2 * c;
    input_features_ = features;
    bool spatial = true;

    for (size_t li = 0; li < topo.lines.size(); ++li) {
        const auto& line = topo.lines[li];
        const int idx = static_cast<int>(li);
        if (!layers_.empty() && layers_.back().kind == LayerKind::SoftmaxXent)
            throw ConfigError("softmaxxent must be the last layer");
        LayerParams lp;
        lp.kind = line.kind;
        lp.in_features = features;
        switch (line.kind) {
            case LayerKind::Convolution: {
                if (!spatial)
                    throw ShapeError("convolution after a fully-connected layer", idx);
                if (x1 % line.s1 != 0 || x2 % line.s2 != 0)
                    throw ConfigError("layer " + std::to_string(li) +
                                      ": stride must divide the input extent (" +
                                      std::to_string(x1) + "x" + std::to_string(x2) + " vs stride " +
                                      std::to_string(line.s1) + "x" + std::to_string(line.s2) + ")");
                if (line.w1 > x1 || line.w2 > x2)
                    throw ConfigError("layer " + std::to_string(li) + ": window exceeds input extent");
                lp.geom = kernels::ConvGeom{x1, x2, c, line.n2, line.w1, line.w2, line.s1, line.s2};
                lp.W = Tensor({line.w1, line.w2, c, line.n2});
                lp.b = Tensor({line.n2});
                init_uniform(lp.W, derive_seed(seed, li, 0x5743), c, line.n2);
                x1 = lp.geom.o1();
                x2 = lp.geom.o2();
                c = line.n2;
                features = x1 * x2 * c;
                break;
            }
            case LayerKind::FullyConnected: {
                lp.W = Tensor({line.n2, features});
                lp.b = Tensor({line.n2});
                init_uniform(lp.W, derive_seed(seed, li, 0x5743), features, line.n2);
                features = line.n2;
                spatial = false;
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::SoftmaxXent:
                break;
        }
        lp.out_features = features;
        offsets_.push_back(param_count_);
        param_count_ += lp.param_count();
        layers_.push_back(std::move(lp));
    }
    class_count_ = features;
}

const Tensor& Network::forward(const Tensor& batch) {
    if (batch.shape.empty() || batch.shape[0] == 0) throw ShapeError("empty batch");
    if (batch.features() != input_features_)
        throw ShapeError("batch features " + std::to_string(batch.features()) +
                             " do not match network input " + std::to_string(input_features_),
                         0);
    const size_t bs = batch.shape[0];
    acts_.assign(layers_.size() + 1, Tensor{});
    conv_cols_.assign(layers_.size(), {});
    acts_[0] = batch;

    for (size_t li = 0; li < layers_.size(); ++li) {
        const auto& lp = layers_[li];
        const Tensor& in = acts_[li];
        if (in.features() != lp.in_features)
            throw ShapeError("activation features " + std::to_string(in.features()) +
                                 " do not compose with expected " + std::to_string(lp.in_features),
                             static_cast<int>(li));
        Tensor out({bs, lp.out_features});
        switch (lp.kind) {
            case LayerKind::FullyConnected:
                kernels::fc_forward(in.data.data(), lp.W.data.data(), lp.b.data.data(),
                                    out.data.data(), bs, lp.in_features, lp.out_features);
                break;
            case LayerKind::Convolution: {
                conv_cols_[li].resize(bs * lp.geom.o1() * lp.geom.o2() * lp.geom.patch());
                kernels::conv_forward(in.data.data(), lp.W.data.data(), lp.b.data.data(),
                                      out.data.data(), lp.geom, bs, conv_cols_[li].data());
                break;
            }
            case LayerKind::ReLU:
                kernels::relu_forward(in.data.data(), out.data.data(), in.size());
                break;
            case LayerKind::SoftmaxXent:
                kernels::softmax(in.data.data(), out.data.data(), bs, lp.out_features);
                break;
        }
        acts_[li + 1] = std::move(out);
    }
    forward_done_ = true;
    return acts_.back();
}

double Network::loss(const Tensor& labels) const {
    if (!forward_done_) throw Error("loss() called before forward()");
    const Tensor& pred = acts_.back();
    if (!labels.same_shape(pred)) throw ShapeError("label shape does not match predictions");
    return kernels::cross_entropy(pred.data.data(), labels.data.data(), pred.shape[0],
                                  pred.features());
}

std::pair<double, FlatVector> Network::backward(const Tensor& labels) {
    if (!forward_done_) throw Error("backward() called before forward()");
    if (layers_.empty() || layers_.back().kind != LayerKind::SoftmaxXent)
        throw ConfigError("backward() requires a softmaxxent loss layer");
    const Tensor& pred = acts_.back();
    if (!labels.same_shape(pred)) throw ShapeError("label shape does not match predictions");
    const size_t bs = pred.shape[0];
    const double loss_value = loss(labels);

    FlatVector grad(param_count_, 0.0);
    // delta flows backward; at entry of the loop body it is d(loss)/d(output of layer li)
    Tensor delta({bs, layers_.back().out_features});
    kernels::softmax_xent_backward(pred.data.data(), labels.data.data(), delta.data.data(), bs,
                                   layers_.back().out_features);

    for (size_t li = layers_.size(); li-- > 0;) {
        const auto& lp = layers_[li];
        if (lp.kind == LayerKind::SoftmaxXent) continue;  // already folded into delta
        const Tensor& in = acts_[li];
        Tensor prev_delta({bs, lp.in_features});
        switch (lp.kind) {
            case LayerKind::ReLU:
                kernels::relu_backward(in.data.data(), delta.data.data(), prev_delta.data.data(),
                                       in.size());
                break;
            case LayerKind::FullyConnected: {
                double* dw = grad.data() + offsets_[li];
                double* db = dw + lp.W.size();
                kernels::fc_grad_weights(in.data.data(), delta.data.data(), dw, bs, lp.in_features,
                                         lp.out_features);
                kernels::fc_grad_bias(delta.data.data(), db, bs, lp.out_features);
                kernels::fc_grad_input(delta.data.data(), lp.W.data.data(), prev_delta.data.data(),
                                       bs, lp.in_features, lp.out_features);
                break;
            }
            case LayerKind::Convolution: {
                double* dw = grad.data() + offsets_[li];
                double* db = dw + lp.W.size();
                kernels::conv_grad_weights(conv_cols_[li].data(), delta.data.data(), dw, lp.geom, bs);
                kernels::conv_grad_bias(delta.data.data(), db, lp.geom, bs);
                std::vector<double> scratch(conv_cols_[li].size());
                kernels::conv_grad_input(delta.data.data(), lp.W.data.data(), prev_delta.data.data(),
                                         lp.geom, bs, scratch.data());
                break;
            }
            case LayerKind::SoftmaxXent:
                break;
        }
        delta = std::move(prev_delta);
    }
    return {loss_value, std::move(grad)};
}

void Network::apply_update(const FlatVector& grad, double lr) {
    if (grad.size() != param_count_)
        throw ShapeError("gradient length " + std::to_string(grad.size()) +
                         " does not match parameter count " + std::to_string(param_count_));
    size_t off = 0;
    for (auto& lp : layers_) {
        for (double& w : lp.W.data) w -= lr * grad[off++];
        for (double& b : lp.b.data) b -= lr * grad[off++];
    }
}

FlatVector Network::parameter_vector() const {
    FlatVector v;
    v.reserve(param_count_);
    for (const auto& lp : layers_) {
        v.insert(v.end(), lp.W.data.begin(), lp.W.data.end());
        v.insert(v.end(), lp.b.data.begin(), lp.b.data.end());
    }
    return v;
}

void Network::load_parameter_vector(const FlatVector& v) {
    if (v.size() != param_count_)
        throw ShapeError("parameter vector length " + std::to_string(v.size()) +
                         " does not match parameter count " + std::to_string(param_count_));
    size_t off = 0;
    for (auto& lp : layers_) {
        for (double& w : lp.W.data) w = v[off++];
        for (double& b : lp.b.data) b = v[off++];
    }
}

double Network::get_param(size_t flat_index) const {
    size_t off = flat_index;
    for (const auto& lp : layers_) {
        if (off < lp.W.size()) return lp.W.data[off];
        off -= lp.W.size();
        if (off < lp.b.size()) return lp.b.data[off];
        off -= lp.b.size();
    }
    throw ShapeError("parameter index out of range");
}

void Network::set_param(size_t flat_index, double value) {
    size_t off = flat_index;
    for (auto& lp : layers_) {
        if (off < lp.W.size()) {
            lp.W.data[off] = value;
            return;
        }
        off -= lp.W.size();
        if (off < lp.b.size()) {
            lp.b.data[off] = value;
            return;
        }
        off -= lp.b.size();
    }
    throw ShapeError("parameter index out of range");
}

Network load_network(const std::string& topology_path, uint64_t seed) {
    return Network(parse_topology_file(topology_path), seed);
}

Tensor one_hot(const std::vector<uint32_t>& labels, size_t class_count) {
    Tensor t({labels.size(), class_count});
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= class_count) throw ShapeError("label id exceeds class count");
        t.at(i, labels[i]) = 1.0;
    }
    return t;
}

}  // namespace ftdl
