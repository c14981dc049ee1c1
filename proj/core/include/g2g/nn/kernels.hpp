#pragma once

#include <vector>

#include "g2g/nn/tensor.hpp"

namespace g2g::nn {

// Row-major C = alpha * op(A) [m x k] * op(B) [k x n] + beta * C, dispatched
// to BLAS. The library is pinned to one thread so results are reproducible.
template <typename T>
void gemm_rm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, const T* b,
             T beta, T* c);

template <>
void gemm_rm<float>(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                    const float* b, float beta, float* c);
template <>
void gemm_rm<double>(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                     const double* a, const double* b, double beta, double* c);

// Patch matrix [ch*k*k, ho*wo] for one sample; out-of-image taps read zero.
template <typename T>
void im2col(const T* x, int ch, int h, int w, int k, int s, int p, T* col);

// Adjoint of im2col: scatter-adds col back into x (caller zeroes x first).
template <typename T>
void col2im(const T* col, int ch, int h, int w, int k, int s, int p, T* x);

// wgt [co, ci, k, k]; bias [1, co, 1, 1] or empty.
template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& wgt, const Tensor<T>& bias, int k, int s,
                    int p, Tensor<T>& y);

// Any of gx / gw / gb may be null. gw and gb accumulate.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& wgt, int k, int s, int p,
                     const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

// wgt [ci, co, k, k]; the forward pass is the adjoint of a stride-s conv, so
// output extent is (in-1)*s - 2p + k.
template <typename T>
void tconv2d_forward(const Tensor<T>& x, const Tensor<T>& wgt, const Tensor<T>& bias, int k, int s,
                     int p, Tensor<T>& y);

template <typename T>
void tconv2d_backward(const Tensor<T>& x, const Tensor<T>& wgt, int k, int s, int p,
                      const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

// Normalizes every (sample, channel) plane over its own spatial extent —
// exactly the statistics a batch of one sees, so batched and per-sample
// evaluation agree bit for bit. mean/invstd come out as [n, c, 1, 1].
template <typename T>
void batch_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                        Tensor<T>& y, Tensor<T>& mean, Tensor<T>& invstd, Tensor<T>& xhat);

// frozen_stats treats mean/var as constants (gradient bypasses the
// statistics); used by the receptive-field probe to keep gradients local.
template <typename T>
void batch_norm_backward(const Tensor<T>& gy, const Tensor<T>& gamma, const Tensor<T>& xhat,
                         const Tensor<T>& invstd, bool frozen_stats, Tensor<T>* gx,
                         Tensor<T>* ggamma, Tensor<T>* gbeta);

template <typename T>
void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& y);

template <typename T>
void leaky_relu_backward(const Tensor<T>& x, T slope, const Tensor<T>& gy, Tensor<T>& gx);

template <typename T>
void tanh_forward(const Tensor<T>& x, Tensor<T>& y);

// Uses the cached output: d tanh = 1 - y^2.
template <typename T>
void tanh_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>& gx);

// No padding; ties resolve to the first (row-major) maximum. argmax stores
// flat per-sample input offsets for the backward scatter.
template <typename T>
void maxpool_forward(const Tensor<T>& x, int k, int s, Tensor<T>& y, std::vector<int>& argmax);

template <typename T>
void maxpool_backward(const std::vector<int>& argmax, const Tensor<T>& gy, Tensor<T>& gx);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// Splits ab into the leading ca channels and the rest; adjoint of concat.
template <typename T>
void split_channels(const Tensor<T>& ab, int ca, Tensor<T>& a, Tensor<T>& b);

}  // namespace g2g::nn
