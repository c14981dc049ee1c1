#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace g2g::nn {

// Dense NCHW activation / parameter storage. Parameter tensors reuse the same
// container with their natural shapes: conv weights [out,in,k,k], transposed
// conv weights [in,out,k,k], vectors as [1,c,1,1].
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  size_t sample_size() const { return static_cast<size_t>(c) * h * w; }
  T* sample(int ni) { return v.data() + sample_size() * ni; }
  const T* sample(int ni) const { return v.data() + sample_size() * ni; }

  T& at(int ni, int ci, int y, int x) {
    return v[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x];
  }
  const T& at(int ni, int ci, int y, int x) const {
    return v[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace g2g::nn
