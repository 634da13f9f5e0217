#pragma once

#include <cstddef>

namespace ftdl::kernels {

/// Kernel execution mode. Parallel uses OpenMP over independent output
/// elements; every element is accumulated in the same order in both modes,
/// so Serial and Parallel produce bitwise-identical results. The setting is
/// thread-local: each simulated compute node picks its own mode.
enum class Mode { Serial, Parallel };

void set_mode(Mode m);
Mode mode();

// ---- fully connected ----------------------------------------------------
// y[m2] layout: y[i*n2+o] = sum_k x[i*n1+k] * w[o*n1+k] + b[o]

void fc_forward(const double* x, const double* w, const double* b, double* y,
                size_t batch, size_t n1, size_t n2);
// dw[o*n1+k] = sum_i dy[i*n2+o] * x[i*n1+k]
void fc_grad_weights(const double* x, const double* dy, double* dw,
                     size_t batch, size_t n1, size_t n2);
// db[o] = sum_i dy[i*n2+o]
void fc_grad_bias(const double* dy, double* db, size_t batch, size_t n2);
// dx[i*n1+k] = sum_o dy[i*n2+o] * w[o*n1+k]
void fc_grad_input(const double* dy, const double* w, double* dx,
                   size_t batch, size_t n1, size_t n2);

// ---- convolution ---------------------------------------------------------
// Channels-last layout: input [batch, x1, x2, n1], output [batch, x1/s1, x2/s2, n2],
// weights [w1, w2, n1, n2]. Output position (i,j) reads the window with origin
// (i*s1, j*s2); taps that fall past the input edge contribute zero, which keeps
// the output extent at exactly x/s for any window size.

struct ConvGeom {
    size_t x1, x2;  // input spatial extents
    size_t n1, n2;  // input / output feature counts
    size_t w1, w2;  // window
    size_t s1, s2;  // strides (must divide x1, x2)

    size_t o1() const { return x1 / s1; }
    size_t o2() const { return x2 / s2; }
    size_t patch() const { return w1 * w2 * n1; }
};

// Lowers the convolution to a matrix product over materialized patches
// (redundant-weights view): cols[batch*o1*o2, w1*w2*n1].
void im2col(const double* x, double* cols, const ConvGeom& g, size_t batch);
// Gather-form adjoint of im2col (no scatter races, deterministic).
void col2im(const double* cols, double* dx, const ConvGeom& g, size_t batch);

void conv_forward(const double* x, const double* w, const double* b, double* y,
                  const ConvGeom& g, size_t batch, double* cols_scratch);
void conv_grad_weights(const double* cols, const double* dy, double* dw,
                       const ConvGeom& g, size_t batch);
void conv_grad_bias(const double* dy, double* db, const ConvGeom& g, size_t batch);
void conv_grad_input(const double* dy, const double* w, double* dx,
                     const ConvGeom& g, size_t batch, double* cols_scratch);

// ---- activations / loss ---------------------------------------------------

void relu_forward(const double* z, double* a, size_t n);
// dz[i] = da[i] * (z[i] > 0)
void relu_backward(const double* z, const double* da, double* dz, size_t n);

// Row-wise stable softmax of logits [batch, k] into probs.
void softmax(const double* z, double* p, size_t batch, size_t k);
// Mean cross-entropy of probs against one-hot labels.
double cross_entropy(const double* p, const double* y, size_t batch, size_t k);
// dz = (p - y) / batch  (batch-mean convention)
void softmax_xent_backward(const double* p, const double* y, double* dz,
                           size_t batch, size_t k);

}  // namespace ftdl::kernels
