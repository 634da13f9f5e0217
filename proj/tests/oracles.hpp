// Independent oracles used by the tests. These deliberately avoid the
// library's kernel implementations: the convolution is a direct sliding
// window in a different loop order, sums are plain sequential loops, and
// gradients come from central differences of the loss.
#pragma once

#include <cmath>
#include <vector>

#include "ftdl/network.hpp"

namespace oracle {

// direct convolution with the engine's geometry semantics: output extent
// x/s, window origin at (i*s1, j*s2), out-of-range taps contribute zero.
inline std::vector<double> direct_conv(const std::vector<double>& x, const std::vector<double>& w,
                                       const std::vector<double>& b, size_t batch, size_t x1,
                                       size_t x2, size_t n1, size_t n2, size_t w1, size_t w2,
                                       size_t s1, size_t s2) {
    const size_t o1 = x1 / s1, o2 = x2 / s2;
    std::vector<double> y(batch * o1 * o2 * n2);
    for (size_t bi = 0; bi < batch; ++bi)
        for (size_t oc = 0; oc < n2; ++oc)
            for (size_t i = 0; i < o1; ++i)
                for (size_t j = 0; j < o2; ++j) {
                    double acc = b[oc];
                    for (size_t ic = 0; ic < n1; ++ic)
                        for (size_t u = 0; u < w1; ++u)
                            for (size_t v = 0; v < w2; ++v) {
                                const size_t p = i * s1 + u, q = j * s2 + v;
                                if (p >= x1 || q >= x2) continue;
                                acc += x[((bi * x1 + p) * x2 + q) * n1 + ic] *
                                       w[((u * w2 + v) * n1 + ic) * n2 + oc];
                            }
                    y[((bi * o1 + i) * o2 + j) * n2 + oc] = acc;
                }
    return y;
}

// whole-network forward through direct kernels, independent of ftdl::kernels
inline std::vector<double> direct_forward(const ftdl::Network& net, const ftdl::Tensor& batch) {
    using ftdl::LayerKind;
    std::vector<double> a = batch.data;
    const size_t bs = batch.shape[0];
    for (const auto& lp : net.layers()) {
        switch (lp.kind) {
            case LayerKind::Convolution: {
                const auto& g = lp.geom;
                a = direct_conv(a, lp.W.data, lp.b.data, bs, g.x1, g.x2, g.n1, g.n2, g.w1, g.w2,
                                g.s1, g.s2);
                break;
            }
            case LayerKind::FullyConnected: {
                std::vector<double> y(bs * lp.out_features);
                for (size_t i = 0; i < bs; ++i)
                    for (size_t o = 0; o < lp.out_features; ++o) {
                        double acc = lp.b.data[o];
                        for (size_t k2 = 0; k2 < lp.in_features; ++k2)
                            acc += a[i * lp.in_features + k2] * lp.W.data[o * lp.in_features + k2];
                        y[i * lp.out_features + o] = acc;
                    }
                a = std::move(y);
                break;
            }
            case LayerKind::ReLU:
                for (double& v : a) v = v > 0 ? v : 0.0;
                break;
            case LayerKind::SoftmaxXent: {
                const size_t k2 = lp.out_features;
                for (size_t i = 0; i < bs; ++i) {
                    double mx = a[i * k2];
                    for (size_t j = 1; j < k2; ++j) mx = std::max(mx, a[i * k2 + j]);
                    double sum = 0;
                    for (size_t j = 0; j < k2; ++j) sum += std::exp(a[i * k2 + j] - mx);
                    for (size_t j = 0; j < k2; ++j) a[i * k2 + j] = std::exp(a[i * k2 + j] - mx) / sum;
                }
                break;
            }
        }
    }
    return a;
}

// max |analytic - central difference| over the checked parameter indices
inline double max_grad_error(ftdl::Network& net, const ftdl::Tensor& x, const ftdl::Tensor& y,
                             const std::vector<size_t>& param_indices, double h = 1e-5) {
    net.forward(x);
    auto [loss, grad] = net.backward(y);
    (void)loss;
    double worst = 0.0;
    for (size_t p : param_indices) {
        const double orig = net.get_param(p);
        net.set_param(p, orig + h);
        net.forward(x);
        const double up = net.loss(y);
        net.set_param(p, orig - h);
        net.forward(x);
        const double down = net.loss(y);
        net.set_param(p, orig);
        const double numeric = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(grad[p] - numeric));
    }
    net.forward(x);  // restore caches
    return worst;
}

// plain sequential elementwise sum of per-node contributions
inline std::vector<double> sequential_sum(const std::vector<std::vector<double>>& contributions) {
    std::vector<double> out(contributions.front().size(), 0.0);
    for (const auto& c : contributions)
        for (size_t i = 0; i < out.size(); ++i) out[i] += c[i];
    return out;
}

}  // namespace oracle
