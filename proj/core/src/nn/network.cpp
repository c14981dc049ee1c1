#include "g2g/nn/network.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include "g2g/errors.hpp"
#include "g2g/nn/kernels.hpp"

namespace g2g::nn {

namespace {

constexpr double kBnEps = 1e-5;

// Explicit Box-Muller on top of raw 64-bit draws; keeps the weight stream a
// pure function of the seed across standard libraries.
class GaussianDraw {
 public:
  explicit GaussianDraw(uint64_t seed) : rng_(seed) {}
  double next() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    double u2 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_ = true;
    return r * std::cos(a);
  }

 private:
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  bool have_ = false;
  double spare_ = 0.0;
};

template <typename T>
void fill_gaussian(Tensor<T>& t, GaussianDraw& g, double mean, double stddev) {
  for (T& v : t.v) v = static_cast<T>(mean + stddev * g.next());
}

template <typename T>
LayerParams<T> layer_storage(const LayerSpec& l) {
  LayerParams<T> p;
  switch (l.kind) {
    case LayerKind::Conv:
      p.w = Tensor<T>(l.out_ch, l.in_ch, l.kernel, l.kernel);
      p.b = Tensor<T>(1, l.out_ch, 1, 1);
      break;
    case LayerKind::TransposedConv:
      p.w = Tensor<T>(l.in_ch, l.out_ch, l.kernel, l.kernel);
      p.b = Tensor<T>(1, l.out_ch, 1, 1);
      break;
    case LayerKind::BatchNorm:
      p.gamma = Tensor<T>(1, l.in_ch, 1, 1);
      p.beta = Tensor<T>(1, l.in_ch, 1, 1);
      break;
    default:
      break;
  }
  return p;
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const NetworkSpec& spec, uint64_t seed) {
  shape_trace(spec);  // validate wiring before allocating
  GaussianDraw g(seed);
  ModelParams<T> p;
  p.hash = spec_hash(spec);
  p.layers.reserve(spec.layers.size());
  for (const LayerSpec& l : spec.layers) {
    LayerParams<T> lp = layer_storage<T>(l);
    if (!lp.w.empty()) fill_gaussian(lp.w, g, 0.0, 0.02);
    if (!lp.gamma.empty()) fill_gaussian(lp.gamma, g, 1.0, 0.02);
    p.layers.push_back(std::move(lp));
  }
  return p;
}

template <typename T>
Grads<T> zero_grads(const NetworkSpec& spec) {
  Grads<T> g;
  g.hash = spec_hash(spec);
  g.layers.reserve(spec.layers.size());
  for (const LayerSpec& l : spec.layers) g.layers.push_back(layer_storage<T>(l));
  return g;
}

template <typename T>
int64_t param_count(const ModelParams<T>& p) {
  int64_t total = 0;
  for (const LayerParams<T>& l : p.layers)
    total += static_cast<int64_t>(l.w.size() + l.b.size() + l.gamma.size() + l.beta.size());
  return total;
}

template <typename T>
Tensor<T> net_forward(const NetworkSpec& spec, const ModelParams<T>& params, const Tensor<T>& x,
                      ForwardCache<T>* cache, const NetRunOptions& /*opt: forward is mode-free*/,
                      const std::map<int, Tensor<T>>* injected_taps) {
  if (params.layers.size() != spec.layers.size())
    throw ContractViolation(spec.name + ": parameter list does not match layer list");
  if (x.c != spec.in_channels || x.h != spec.in_height || x.w != spec.in_width)
    throw ContractViolation(spec.name + ": input tensor shape does not match network input");

  ForwardCache<T> local;
  ForwardCache<T>& cc = cache ? *cache : local;
  cc.layers.assign(spec.layers.size(), {});
  cc.taps.clear();
  cc.input = x;

  const Tensor<T>* cur = &cc.input;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const LayerParams<T>& lp = params.layers[i];
    LayerCache<T>& lc = cc.layers[i];
    Tensor<T> next;
    switch (l.kind) {
      case LayerKind::Conv:
        conv2d_forward(*cur, lp.w, lp.b, l.kernel, l.stride, l.pad, next);
        break;
      case LayerKind::TransposedConv:
        tconv2d_forward(*cur, lp.w, lp.b, l.kernel, l.stride, l.pad, next);
        break;
      case LayerKind::BatchNorm:
        batch_norm_forward(*cur, lp.gamma, lp.beta, static_cast<T>(kBnEps), next, lc.mean,
                           lc.invstd, lc.xhat);
        break;
      case LayerKind::LeakyRelu:
        leaky_relu_forward(*cur, static_cast<T>(l.slope), next);
        break;
      case LayerKind::Relu:
        leaky_relu_forward(*cur, T(0), next);
        break;
      case LayerKind::Tanh:
        tanh_forward(*cur, next);
        break;
      case LayerKind::MaxPool:
        maxpool_forward(*cur, l.kernel, l.stride, next, lc.argmax);
        break;
      case LayerKind::SkipSource:
        cc.taps[l.tap] = *cur;
        next = *cur;
        break;
      case LayerKind::SkipSink: {
        const Tensor<T>* tap = nullptr;
        auto it = cc.taps.find(l.tap);
        if (it != cc.taps.end()) {
          tap = &it->second;
        } else if (injected_taps) {
          auto jt = injected_taps->find(l.tap);
          if (jt != injected_taps->end()) tap = &jt->second;
        }
        if (!tap)
          throw ContractViolation(spec.name + ": tap " + std::to_string(l.tap) +
                                  " was neither recorded nor injected");
        next = concat_channels(*cur, *tap);
        break;
      }
    }
    lc.y = std::move(next);
    cur = &lc.y;
  }
  return *cur;
}

template <typename T>
Tensor<T> net_backward(const NetworkSpec& spec, const ModelParams<T>& params,
                       const ForwardCache<T>& cache, const Tensor<T>& grad_out, Grads<T>* grads,
                       const NetRunOptions& opt, std::map<int, Tensor<T>>* tap_grads) {
  if (cache.layers.size() != spec.layers.size())
    throw ContractViolation(spec.name + ": forward cache does not match layer list");
  std::map<int, Tensor<T>> local_taps;
  std::map<int, Tensor<T>>& tg = tap_grads ? *tap_grads : local_taps;

  Tensor<T> g = grad_out;
  for (size_t ri = spec.layers.size(); ri-- > 0;) {
    const LayerSpec& l = spec.layers[ri];
    const LayerParams<T>& lp = params.layers[ri];
    const LayerCache<T>& lc = cache.layers[ri];
    const Tensor<T>& x_in = ri == 0 ? cache.input : cache.layers[ri - 1].y;
    LayerParams<T>* gp = grads ? &grads->layers[ri] : nullptr;
    Tensor<T> gx;
    switch (l.kind) {
      case LayerKind::Conv:
        conv2d_backward(x_in, lp.w, l.kernel, l.stride, l.pad, g, &gx, gp ? &gp->w : nullptr,
                        gp ? &gp->b : nullptr);
        break;
      case LayerKind::TransposedConv:
        tconv2d_backward(x_in, lp.w, l.kernel, l.stride, l.pad, g, &gx, gp ? &gp->w : nullptr,
                         gp ? &gp->b : nullptr);
        break;
      case LayerKind::BatchNorm:
        batch_norm_backward(g, lp.gamma, lc.xhat, lc.invstd, opt.bn_frozen_stats, &gx,
                            gp ? &gp->gamma : nullptr, gp ? &gp->beta : nullptr);
        break;
      case LayerKind::LeakyRelu:
        leaky_relu_backward(x_in, static_cast<T>(l.slope), g, gx);
        break;
      case LayerKind::Relu:
        leaky_relu_backward(x_in, T(0), g, gx);
        break;
      case LayerKind::Tanh:
        tanh_backward(lc.y, g, gx);
        break;
      case LayerKind::MaxPool:
        gx = Tensor<T>(x_in.n, x_in.c, x_in.h, x_in.w);
        maxpool_backward(lc.argmax, g, gx);
        break;
      case LayerKind::SkipSource: {
        gx = std::move(g);
        auto it = tg.find(l.tap);
        if (it != tg.end()) {
          if (!it->second.same_shape(gx))
            throw ContractViolation(spec.name + ": tap " + std::to_string(l.tap) +
                                    " gradient shape mismatch");
          for (size_t i = 0; i < gx.size(); ++i) gx.v[i] += it->second.v[i];
          tg.erase(it);
        }
        break;
      }
      case LayerKind::SkipSink: {
        Tensor<T> tap_part;
        split_channels(g, x_in.c, gx, tap_part);
        auto it = tg.find(l.tap);
        if (it == tg.end()) {
          tg.emplace(l.tap, std::move(tap_part));
        } else {
          for (size_t i = 0; i < tap_part.size(); ++i) it->second.v[i] += tap_part.v[i];
        }
        break;
      }
    }
    g = std::move(gx);
  }
  return g;
}

template <typename T>
AdamState<T> zero_adam(const NetworkSpec& spec) {
  AdamState<T> s;
  s.m.reserve(spec.layers.size());
  s.v.reserve(spec.layers.size());
  for (const LayerSpec& l : spec.layers) {
    s.m.push_back(layer_storage<T>(l));
    s.v.push_back(layer_storage<T>(l));
  }
  return s;
}

namespace {

template <typename T>
void adam_update(Tensor<T>& p, const Tensor<T>& g, Tensor<T>& m, Tensor<T>& v, T lr, T beta1,
                 T beta2, T eps, T bc1, T bc2) {
  for (size_t i = 0; i < p.size(); ++i) {
    m.v[i] = beta1 * m.v[i] + (T(1) - beta1) * g.v[i];
    v.v[i] = beta2 * v.v[i] + (T(1) - beta2) * g.v[i] * g.v[i];
    T mhat = m.v[i] / bc1;
    T vhat = v.v[i] / bc2;
    p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

template <typename T>
void adam_step(ModelParams<T>& params, const Grads<T>& grads, AdamState<T>& state, T lr, T beta1,
               T beta2, T eps) {
  if (params.layers.size() != grads.layers.size() || params.layers.size() != state.m.size())
    throw ContractViolation("optimizer state does not match parameter layout");
  state.t += 1;
  T bc1 = T(1) - std::pow(beta1, static_cast<T>(state.t));
  T bc2 = T(1) - std::pow(beta2, static_cast<T>(state.t));
  for (size_t i = 0; i < params.layers.size(); ++i) {
    LayerParams<T>& p = params.layers[i];
    const LayerParams<T>& g = grads.layers[i];
    adam_update(p.w, g.w, state.m[i].w, state.v[i].w, lr, beta1, beta2, eps, bc1, bc2);
    adam_update(p.b, g.b, state.m[i].b, state.v[i].b, lr, beta1, beta2, eps, bc1, bc2);
    adam_update(p.gamma, g.gamma, state.m[i].gamma, state.v[i].gamma, lr, beta1, beta2, eps, bc1, bc2);
    adam_update(p.beta, g.beta, state.m[i].beta, state.v[i].beta, lr, beta1, beta2, eps, bc1, bc2);
  }
}

namespace {

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
  int32_t dims[4] = {t.n, t.c, t.h, t.w};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
}

template <typename T>
Tensor<T> read_tensor(std::istream& in) {
  int32_t dims[4];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in) throw CheckpointError("truncated tensor header");
  if (dims[0] < 0 || dims[1] < 0 || dims[2] < 0 || dims[3] < 0)
    throw CheckpointError("corrupt tensor header");
  Tensor<T> t;
  t.n = dims[0];
  t.c = dims[1];
  t.h = dims[2];
  t.w = dims[3];
  t.v.resize(static_cast<size_t>(dims[0]) * dims[1] * dims[2] * dims[3]);
  in.read(reinterpret_cast<char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(T)));
  if (!in) throw CheckpointError("truncated tensor payload");
  return t;
}

template <typename T>
void write_layer(std::ostream& out, const LayerParams<T>& l) {
  write_tensor(out, l.w);
  write_tensor(out, l.b);
  write_tensor(out, l.gamma);
  write_tensor(out, l.beta);
}

template <typename T>
LayerParams<T> read_layer(std::istream& in) {
  LayerParams<T> l;
  l.w = read_tensor<T>(in);
  l.b = read_tensor<T>(in);
  l.gamma = read_tensor<T>(in);
  l.beta = read_tensor<T>(in);
  return l;
}

}  // namespace

template <typename T>
void write_params(std::ostream& out, const ModelParams<T>& p) {
  uint32_t scalar = sizeof(T);
  uint64_t n = p.layers.size();
  out.write(reinterpret_cast<const char*>(&scalar), sizeof scalar);
  out.write(reinterpret_cast<const char*>(&p.hash), sizeof p.hash);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& l : p.layers) write_layer(out, l);
}

template <typename T>
ModelParams<T> read_params(std::istream& in) {
  uint32_t scalar = 0;
  ModelParams<T> p;
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&scalar), sizeof scalar);
  in.read(reinterpret_cast<char*>(&p.hash), sizeof p.hash);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in) throw CheckpointError("truncated parameter block");
  if (scalar != sizeof(T)) throw CheckpointError("parameter scalar width does not match build");
  p.layers.reserve(n);
  for (uint64_t i = 0; i < n; ++i) p.layers.push_back(read_layer<T>(in));
  return p;
}

template <typename T>
void write_adam(std::ostream& out, const AdamState<T>& s) {
  uint64_t t = static_cast<uint64_t>(s.t);
  uint64_t n = s.m.size();
  out.write(reinterpret_cast<const char*>(&t), sizeof t);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& l : s.m) write_layer(out, l);
  for (const auto& l : s.v) write_layer(out, l);
}

template <typename T>
AdamState<T> read_adam(std::istream& in) {
  AdamState<T> s;
  uint64_t t = 0, n = 0;
  in.read(reinterpret_cast<char*>(&t), sizeof t);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in) throw CheckpointError("truncated optimizer block");
  s.t = static_cast<int64_t>(t);
  s.m.reserve(n);
  s.v.reserve(n);
  for (uint64_t i = 0; i < n; ++i) s.m.push_back(read_layer<T>(in));
  for (uint64_t i = 0; i < n; ++i) s.v.push_back(read_layer<T>(in));
  return s;
}

#define G2G_INSTANTIATE_NETWORK(T)                                                               \
  template ModelParams<T> init_params<T>(const NetworkSpec&, uint64_t);                          \
  template Grads<T> zero_grads<T>(const NetworkSpec&);                                           \
  template int64_t param_count<T>(const ModelParams<T>&);                                        \
  template Tensor<T> net_forward<T>(const NetworkSpec&, const ModelParams<T>&, const Tensor<T>&, \
                                    ForwardCache<T>*, const NetRunOptions&,                      \
                                    const std::map<int, Tensor<T>>*);                            \
  template Tensor<T> net_backward<T>(const NetworkSpec&, const ModelParams<T>&,                  \
                                     const ForwardCache<T>&, const Tensor<T>&, Grads<T>*,        \
                                     const NetRunOptions&, std::map<int, Tensor<T>>*);           \
  template AdamState<T> zero_adam<T>(const NetworkSpec&);                                        \
  template void adam_step<T>(ModelParams<T>&, const Grads<T>&, AdamState<T>&, T, T, T, T);       \
  template void write_params<T>(std::ostream&, const ModelParams<T>&);                           \
  template ModelParams<T> read_params<T>(std::istream&);                                         \
  template void write_adam<T>(std::ostream&, const AdamState<T>&);                               \
  template AdamState<T> read_adam<T>(std::istream&);

G2G_INSTANTIATE_NETWORK(float)
G2G_INSTANTIATE_NETWORK(double)

#undef G2G_INSTANTIATE_NETWORK

}  // namespace g2g::nn
