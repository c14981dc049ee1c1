#include "g2g/nn/kernels.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>

#include "g2g/errors.hpp"
#include "g2g/nn/spec.hpp"

namespace g2g::nn {

namespace {

// One worker keeps accumulation order fixed; parallelism would make repeated
// runs drift in the last bits.
void pin_blas_threads() {
  static const bool once = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)once;
}

}  // namespace

template <>
void gemm_rm<float>(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                    const float* b, float beta, float* c) {
  pin_blas_threads();
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
}

template <>
void gemm_rm<double>(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                     const double* b, double beta, double* c) {
  pin_blas_threads();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
}

template <typename T>
void im2col(const T* x, int ch, int h, int w, int k, int s, int p, T* col) {
  const int ho = conv_out_extent(h, k, s, p);
  const int wo = conv_out_extent(w, k, s, p);
  T* out = col;
  for (int c = 0; c < ch; ++c) {
    const T* plane = x + static_cast<size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) {
            std::memset(out, 0, sizeof(T) * wo);
            out += wo;
            continue;
          }
          const T* row = plane + static_cast<size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * s - p + kx;
            out[ox] = (ix >= 0 && ix < w) ? row[ix] : T(0);
          }
          out += wo;
        }
      }
  }
}

template <typename T>
void col2im(const T* col, int ch, int h, int w, int k, int s, int p, T* x) {
  const int ho = conv_out_extent(h, k, s, p);
  const int wo = conv_out_extent(w, k, s, p);
  const T* in = col;
  for (int c = 0; c < ch; ++c) {
    T* plane = x + static_cast<size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) {
            in += wo;
            continue;
          }
          T* row = plane + static_cast<size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * s - p + kx;
            if (ix >= 0 && ix < w) row[ix] += in[ox];
          }
          in += wo;
        }
      }
  }
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& wgt, const Tensor<T>& bias, int k, int s,
                    int p, Tensor<T>& y) {
  const int ci = x.c, co = wgt.n;
  if (wgt.c != ci || wgt.h != k || wgt.w != k)
    throw ContractViolation("conv weight shape does not match layer");
  const int ho = conv_out_extent(x.h, k, s, p);
  const int wo = conv_out_extent(x.w, k, s, p);
  y = Tensor<T>(x.n, co, ho, wo);
  const int patch = ci * k * k;
  const int cols = ho * wo;
  std::vector<T> col(static_cast<size_t>(patch) * cols);
  for (int ni = 0; ni < x.n; ++ni) {
    im2col(x.sample(ni), ci, x.h, x.w, k, s, p, col.data());
    gemm_rm<T>(false, false, co, cols, patch, T(1), wgt.data(), col.data(), T(0), y.sample(ni));
    if (!bias.empty()) {
      T* out = y.sample(ni);
      for (int c = 0; c < co; ++c) {
        T b = bias.v[static_cast<size_t>(c)];
        for (int i = 0; i < cols; ++i) out[static_cast<size_t>(c) * cols + i] += b;
      }
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& wgt, int k, int s, int p,
                     const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const int ci = x.c, co = wgt.n;
  const int ho = gy.h, wo = gy.w;
  const int patch = ci * k * k;
  const int cols = ho * wo;
  std::vector<T> col(static_cast<size_t>(patch) * cols);
  if (gx) {
    *gx = Tensor<T>(x.n, x.c, x.h, x.w);
  }
  for (int ni = 0; ni < x.n; ++ni) {
    if (gw) {
      im2col(x.sample(ni), ci, x.h, x.w, k, s, p, col.data());
      // gw [co, patch] += gy [co, cols] * col^T [cols, patch]
      gemm_rm<T>(false, true, co, patch, cols, T(1), gy.sample(ni), col.data(), T(1), gw->data());
    }
    if (gb) {
      const T* g = gy.sample(ni);
      for (int c = 0; c < co; ++c) {
        T acc = T(0);
        for (int i = 0; i < cols; ++i) acc += g[static_cast<size_t>(c) * cols + i];
        gb->v[static_cast<size_t>(c)] += acc;
      }
    }
    if (gx) {
      // dcol [patch, cols] = wgt^T [patch, co] * gy [co, cols]
      gemm_rm<T>(true, false, patch, cols, co, T(1), wgt.data(), gy.sample(ni), T(0), col.data());
      col2im(col.data(), ci, x.h, x.w, k, s, p, gx->sample(ni));
    }
  }
}

template <typename T>
void tconv2d_forward(const Tensor<T>& x, const Tensor<T>& wgt, const Tensor<T>& bias, int k, int s,
                     int p, Tensor<T>& y) {
  const int ci = x.c, co = wgt.c;
  if (wgt.n != ci || wgt.h != k || wgt.w != k)
    throw ContractViolation("transposed conv weight shape does not match layer");
  const int ho = tconv_out_extent(x.h, k, s, p);
  const int wo = tconv_out_extent(x.w, k, s, p);
  y = Tensor<T>(x.n, co, ho, wo);
  const int patch = co * k * k;
  const int cols = x.h * x.w;
  std::vector<T> col(static_cast<size_t>(patch) * cols);
  for (int ni = 0; ni < x.n; ++ni) {
    // col [patch, cols] = wgt^T [patch, ci] * x [ci, cols], then scatter into
    // the (larger) output plane: the adjoint of an im2col taken on y.
    gemm_rm<T>(true, false, patch, cols, ci, T(1), wgt.data(), x.sample(ni), T(0), col.data());
    col2im(col.data(), co, ho, wo, k, s, p, y.sample(ni));
    if (!bias.empty()) {
      T* out = y.sample(ni);
      const int plane = ho * wo;
      for (int c = 0; c < co; ++c) {
        T b = bias.v[static_cast<size_t>(c)];
        for (int i = 0; i < plane; ++i) out[static_cast<size_t>(c) * plane + i] += b;
      }
    }
  }
}

template <typename T>
void tconv2d_backward(const Tensor<T>& x, const Tensor<T>& wgt, int k, int s, int p,
                      const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const int ci = x.c, co = wgt.c;
  const int patch = co * k * k;
  const int cols = x.h * x.w;
  std::vector<T> col(static_cast<size_t>(patch) * cols);
  if (gx) *gx = Tensor<T>(x.n, x.c, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni) {
    const bool need_col = gx || gw;
    if (need_col) im2col(gy.sample(ni), co, gy.h, gy.w, k, s, p, col.data());
    if (gx) {
      // gx [ci, cols] = wgt [ci, patch] * col [patch, cols]
      gemm_rm<T>(false, false, ci, cols, patch, T(1), wgt.data(), col.data(), T(0), gx->sample(ni));
    }
    if (gw) {
      // gw [ci, patch] += x [ci, cols] * col^T [cols, patch]
      gemm_rm<T>(false, true, ci, patch, cols, T(1), x.sample(ni), col.data(), T(1), gw->data());
    }
    if (gb) {
      const T* g = gy.sample(ni);
      const int plane = gy.h * gy.w;
      for (int c = 0; c < co; ++c) {
        T acc = T(0);
        for (int i = 0; i < plane; ++i) acc += g[static_cast<size_t>(c) * plane + i];
        gb->v[static_cast<size_t>(c)] += acc;
      }
    }
  }
}

template <typename T>
void batch_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                        Tensor<T>& y, Tensor<T>& mean, Tensor<T>& invstd, Tensor<T>& xhat) {
  y = Tensor<T>(x.n, x.c, x.h, x.w);
  xhat = Tensor<T>(x.n, x.c, x.h, x.w);
  mean = Tensor<T>(x.n, x.c, 1, 1);
  invstd = Tensor<T>(x.n, x.c, 1, 1);
  const int plane = x.h * x.w;
  for (int ni = 0; ni < x.n; ++ni)
    for (int c = 0; c < x.c; ++c) {
      const T* in = x.sample(ni) + static_cast<size_t>(c) * plane;
      T mu = T(0);
      for (int i = 0; i < plane; ++i) mu += in[i];
      mu /= plane;
      T var = T(0);
      for (int i = 0; i < plane; ++i) {
        T d = in[i] - mu;
        var += d * d;
      }
      var /= plane;
      T is = T(1) / std::sqrt(var + eps);
      mean.at(ni, c, 0, 0) = mu;
      invstd.at(ni, c, 0, 0) = is;
      T g = gamma.v[static_cast<size_t>(c)];
      T b = beta.v[static_cast<size_t>(c)];
      T* xh = xhat.sample(ni) + static_cast<size_t>(c) * plane;
      T* out = y.sample(ni) + static_cast<size_t>(c) * plane;
      for (int i = 0; i < plane; ++i) {
        xh[i] = (in[i] - mu) * is;
        out[i] = g * xh[i] + b;
      }
    }
}

template <typename T>
void batch_norm_backward(const Tensor<T>& gy, const Tensor<T>& gamma, const Tensor<T>& xhat,
                         const Tensor<T>& invstd, bool frozen_stats, Tensor<T>* gx,
                         Tensor<T>* ggamma, Tensor<T>* gbeta) {
  const int plane = gy.h * gy.w;
  if (gx) *gx = Tensor<T>(gy.n, gy.c, gy.h, gy.w);
  for (int ni = 0; ni < gy.n; ++ni)
    for (int c = 0; c < gy.c; ++c) {
      const T* g = gy.sample(ni) + static_cast<size_t>(c) * plane;
      const T* xh = xhat.sample(ni) + static_cast<size_t>(c) * plane;
      T sum_g = T(0), sum_gx = T(0);
      for (int i = 0; i < plane; ++i) {
        sum_g += g[i];
        sum_gx += g[i] * xh[i];
      }
      if (gbeta) gbeta->v[static_cast<size_t>(c)] += sum_g;
      if (ggamma) ggamma->v[static_cast<size_t>(c)] += sum_gx;
      if (gx) {
        T gam = gamma.v[static_cast<size_t>(c)];
        T is = invstd.at(ni, c, 0, 0);
        T* out = gx->sample(ni) + static_cast<size_t>(c) * plane;
        if (frozen_stats) {
          for (int i = 0; i < plane; ++i) out[i] = g[i] * gam * is;
        } else {
          T mg = sum_g / plane, mgx = sum_gx / plane;
          for (int i = 0; i < plane; ++i) out[i] = gam * is * (g[i] - mg - xh[i] * mgx);
        }
      }
    }
}

template <typename T>
void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& y) {
  y = Tensor<T>(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > T(0) ? x.v[i] : slope * x.v[i];
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& x, T slope, const Tensor<T>& gy, Tensor<T>& gx) {
  gx = Tensor<T>(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) gx.v[i] = x.v[i] > T(0) ? gy.v[i] : slope * gy.v[i];
}

template <typename T>
void tanh_forward(const Tensor<T>& x, Tensor<T>& y) {
  y = Tensor<T>(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) y.v[i] = std::tanh(x.v[i]);
}

template <typename T>
void tanh_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>& gx) {
  gx = Tensor<T>(y.n, y.c, y.h, y.w);
  for (size_t i = 0; i < y.size(); ++i) gx.v[i] = gy.v[i] * (T(1) - y.v[i] * y.v[i]);
}

template <typename T>
void maxpool_forward(const Tensor<T>& x, int k, int s, Tensor<T>& y, std::vector<int>& argmax) {
  const int ho = conv_out_extent(x.h, k, s, 0);
  const int wo = conv_out_extent(x.w, k, s, 0);
  y = Tensor<T>(x.n, x.c, ho, wo);
  argmax.assign(y.size(), 0);
  size_t oi = 0;
  for (int ni = 0; ni < x.n; ++ni)
    for (int c = 0; c < x.c; ++c) {
      const T* plane = x.sample(ni) + static_cast<size_t>(c) * x.h * x.w;
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox, ++oi) {
          int best_idx = (oy * s) * x.w + ox * s;
          T best = plane[best_idx];
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              int idx = (oy * s + ky) * x.w + ox * s + kx;
              if (plane[idx] > best) {
                best = plane[idx];
                best_idx = idx;
              }
            }
          y.v[oi] = best;
          argmax[oi] = static_cast<int>(static_cast<size_t>(c) * x.h * x.w) + best_idx;
        }
    }
}

template <typename T>
void maxpool_backward(const std::vector<int>& argmax, const Tensor<T>& gy, Tensor<T>& gx) {
  // gx must be pre-sized to the pool input shape; accumulates (windows overlap
  // when stride < kernel).
  gx.zero();
  size_t oi = 0;
  const size_t per_sample = gy.sample_size();
  for (int ni = 0; ni < gy.n; ++ni) {
    T* dst = gx.sample(ni);
    for (size_t i = 0; i < per_sample; ++i, ++oi) dst[argmax[oi]] += gy.v[oi];
  }
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw ContractViolation("channel concat needs matching sample and spatial extents");
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  const size_t pa = a.sample_size(), pb = b.sample_size();
  for (int ni = 0; ni < a.n; ++ni) {
    std::memcpy(out.sample(ni), a.sample(ni), pa * sizeof(T));
    std::memcpy(out.sample(ni) + pa, b.sample(ni), pb * sizeof(T));
  }
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& ab, int ca, Tensor<T>& a, Tensor<T>& b) {
  a = Tensor<T>(ab.n, ca, ab.h, ab.w);
  b = Tensor<T>(ab.n, ab.c - ca, ab.h, ab.w);
  const size_t pa = a.sample_size(), pb = b.sample_size();
  for (int ni = 0; ni < ab.n; ++ni) {
    std::memcpy(a.sample(ni), ab.sample(ni), pa * sizeof(T));
    std::memcpy(b.sample(ni), ab.sample(ni) + pa, pb * sizeof(T));
  }
}

#define G2G_INSTANTIATE_KERNELS(T)                                                              \
  template void im2col<T>(const T*, int, int, int, int, int, int, T*);                          \
  template void col2im<T>(const T*, int, int, int, int, int, int, T*);                          \
  template void conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,    \
                                  int, int, Tensor<T>&);                                        \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, int, int, int,           \
                                   const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);       \
  template void tconv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,   \
                                   int, int, Tensor<T>&);                                       \
  template void tconv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, int, int, int,          \
                                    const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);      \
  template void batch_norm_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T,  \
                                      Tensor<T>&, Tensor<T>&, Tensor<T>&, Tensor<T>&);          \
  template void batch_norm_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                       const Tensor<T>&, bool, Tensor<T>*, Tensor<T>*,          \
                                       Tensor<T>*);                                             \
  template void leaky_relu_forward<T>(const Tensor<T>&, T, Tensor<T>&);                         \
  template void leaky_relu_backward<T>(const Tensor<T>&, T, const Tensor<T>&, Tensor<T>&);      \
  template void tanh_forward<T>(const Tensor<T>&, Tensor<T>&);                                  \
  template void tanh_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);               \
  template void maxpool_forward<T>(const Tensor<T>&, int, int, Tensor<T>&, std::vector<int>&);  \
  template void maxpool_backward<T>(const std::vector<int>&, const Tensor<T>&, Tensor<T>&);     \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                    \
  template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);

G2G_INSTANTIATE_KERNELS(float)
G2G_INSTANTIATE_KERNELS(double)

#undef G2G_INSTANTIATE_KERNELS

}  // namespace g2g::nn
