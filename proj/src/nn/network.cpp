#include "lorafp/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "lorafp/error.hpp"

namespace lorafp::nn {

namespace {

constexpr double kBatchNormEps = 1e-5;
constexpr double kRunningMomentum = 0.1;

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::batchnorm:
      return "batchnorm";
    case LayerKind::relu:
      return "relu";
    case LayerKind::maxpool:
      return "maxpool";
    case LayerKind::dense:
      return "dense";
    case LayerKind::softmax:
      return "softmax";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
  for (LayerKind k : {LayerKind::conv, LayerKind::batchnorm, LayerKind::relu, LayerKind::maxpool, LayerKind::dense,
                      LayerKind::softmax})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv(int filters, int kh, int kw, int pt, int pb, int pl, int pr) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.filters = filters;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.pad_top = pt;
  s.pad_bottom = pb;
  s.pad_left = pl;
  s.pad_right = pr;
  return s;
}

LayerSpec LayerSpec::batchnorm() {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::maxpool(int kh, int kw, int sh, int sw) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride_h = sh;
  s.stride_w = sw;
  return s;
}

LayerSpec LayerSpec::dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::softmax;
  return s;
}

CnnSpec CnnSpec::spectrogram(Shape input, int num_classes, std::array<int, 3> filters, int kernel) {
  CnnSpec s;
  s.name = "spectrogram";
  s.input = input;
  s.num_classes = num_classes;
  const int lo = (kernel - 1) / 2, hi = kernel / 2;
  for (int f : filters) {
    s.layers.push_back(LayerSpec::conv(f, kernel, kernel, lo, hi, lo, hi));
    s.layers.push_back(LayerSpec::batchnorm());
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::maxpool(2, 2, 2, 2));
  }
  s.layers.push_back(LayerSpec::dense(num_classes));
  s.layers.push_back(LayerSpec::softmax());
  return s;
}

CnnSpec CnnSpec::iq_fft(Shape input, int num_classes, std::array<int, 3> filters, std::array<int, 3> kernel_w,
                        int pool) {
  CnnSpec s;
  s.name = "iq_fft";
  s.input = input;
  s.num_classes = num_classes;
  const std::array<int, 3> kernel_h = {1, 2, 2};
  for (int i = 0; i < 3; ++i) {
    s.layers.push_back(LayerSpec::conv(filters[static_cast<std::size_t>(i)], kernel_h[static_cast<std::size_t>(i)],
                                       kernel_w[static_cast<std::size_t>(i)], 0,
                                       kernel_h[static_cast<std::size_t>(i)] - 1, 0, 0));
    s.layers.push_back(LayerSpec::batchnorm());
    s.layers.push_back(LayerSpec::relu());
    if (i < 2) s.layers.push_back(LayerSpec::maxpool(1, pool, 1, pool));
  }
  s.layers.push_back(LayerSpec::dense(num_classes));
  s.layers.push_back(LayerSpec::softmax());
  return s;
}

CnnSpec CnnSpec::dense_only(Shape input, int num_classes) {
  CnnSpec s;
  s.name = "dense_only";
  s.input = input;
  s.num_classes = num_classes;
  s.layers = {LayerSpec::dense(num_classes), LayerSpec::softmax()};
  return s;
}

std::vector<Shape> CnnSpec::shapes() const {
  if (num_classes < 2) throw ShapeError("a classifier needs at least two classes");
  if (input.c < 1 || input.h < 1 || input.w < 1) throw ShapeError("input shape " + input.str() + " is empty");
  if (layers.size() < 2 || layers.back().kind != LayerKind::softmax ||
      layers[layers.size() - 2].kind != LayerKind::dense || layers[layers.size() - 2].units != num_classes)
    throw ShapeError("network must end with dense(" + std::to_string(num_classes) + ") and softmax");
  std::vector<Shape> out{input};
  Shape cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ") on input " + cur.str();
    switch (l.kind) {
      case LayerKind::conv: {
        if (l.filters < 1 || l.kernel_h < 1 || l.kernel_w < 1) throw ShapeError(where + ": bad conv geometry");
        const int oh = cur.h + l.pad_top + l.pad_bottom - l.kernel_h + 1;
        const int ow = cur.w + l.pad_left + l.pad_right - l.kernel_w + 1;
        if (oh < 1 || ow < 1) throw ShapeError(where + ": kernel larger than padded input");
        cur = {l.filters, oh, ow};
        break;
      }
      case LayerKind::maxpool: {
        if (l.kernel_h < 1 || l.kernel_w < 1 || l.stride_h < 1 || l.stride_w < 1)
          throw ShapeError(where + ": bad pooling geometry");
        if (cur.h < l.kernel_h || cur.w < l.kernel_w) throw ShapeError(where + ": pooling window larger than input");
        cur = {cur.c, (cur.h - l.kernel_h) / l.stride_h + 1, (cur.w - l.kernel_w) / l.stride_w + 1};
        break;
      }
      case LayerKind::dense:
        if (l.units < 1) throw ShapeError(where + ": dense layer needs units");
        cur = {l.units, 1, 1};
        break;
      case LayerKind::softmax:
        if (i + 1 != layers.size()) throw ShapeError(where + ": softmax must be the last layer");
        break;
      case LayerKind::batchnorm:
      case LayerKind::relu:
        break;
    }
    out.push_back(cur);
  }
  return out;
}

std::size_t CnnSpec::parameter_count() const {
  const auto sh = shapes();
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const Shape& in = sh[i];
    if (l.kind == LayerKind::conv)
      n += static_cast<std::size_t>(l.filters) * in.c * l.kernel_h * l.kernel_w + static_cast<std::size_t>(l.filters);
    else if (l.kind == LayerKind::dense)
      n += static_cast<std::size_t>(l.units) * in.size() + static_cast<std::size_t>(l.units);
    else if (l.kind == LayerKind::batchnorm)
      n += 2 * static_cast<std::size_t>(in.c);
  }
  return n;
}

template <typename T>
struct Network<T>::Layer {
  LayerSpec spec;
  Shape in, out;
  kernels::ConvGeometry geom;
  // conv/dense: weight + bias; batchnorm: gamma + beta
  AlignedVector<T> weight, bias, dweight, dbias;
  AlignedVector<T> running_mean, running_var;
  std::vector<double> pop_sum, pop_sq;
  double pop_count = 0.0;
  // caches of the last forward pass
  AlignedVector<T> xhat, inv_std;
  std::vector<std::uint32_t> argmax;
};

template <typename T>
Network<T>::Network(CnnSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  shapes_ = spec_.shapes();
  std::mt19937_64 rng(seed);
  layers_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& L = layers_[i];
    L.spec = spec_.layers[i];
    L.in = shapes_[i];
    L.out = shapes_[i + 1];
    const auto he_init = [&rng](AlignedVector<T>& w, std::size_t fan_in) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (T& v : w) v = static_cast<T>(normal(rng));
    };
    switch (L.spec.kind) {
      case LayerKind::conv: {
        L.geom = {L.in.c,          L.in.h,          L.in.w,         L.spec.filters,
                  L.spec.kernel_h, L.spec.kernel_w, L.spec.pad_top, L.spec.pad_bottom,
                  L.spec.pad_left, L.spec.pad_right};
        L.weight.resize(L.geom.weight_size());
        he_init(L.weight, static_cast<std::size_t>(L.in.c) * L.spec.kernel_h * L.spec.kernel_w);
        L.bias.assign(static_cast<std::size_t>(L.spec.filters), T{});
        break;
      }
      case LayerKind::dense:
        L.weight.resize(static_cast<std::size_t>(L.spec.units) * L.in.size());
        he_init(L.weight, L.in.size());
        L.bias.assign(static_cast<std::size_t>(L.spec.units), T{});
        break;
      case LayerKind::batchnorm:
        L.weight.assign(static_cast<std::size_t>(L.in.c), T{1});
        L.bias.assign(static_cast<std::size_t>(L.in.c), T{});
        L.running_mean.assign(static_cast<std::size_t>(L.in.c), T{});
        L.running_var.assign(static_cast<std::size_t>(L.in.c), T{1});
        break;
      default:
        break;
    }
    L.dweight.assign(L.weight.size(), T{});
    L.dbias.assign(L.bias.size(), T{});
  }
}

template <typename T>
Network<T>::Network() = default;
template <typename T>
Network<T>::Network(const Network&) = default;
template <typename T>
Network<T>& Network<T>::operator=(const Network&) = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;
template <typename T>
Network<T>::~Network() = default;

namespace {

// Sum of a plane with independent lanes so the loop vectorizes without reassociation; lanes are
// combined in double in a fixed order.
constexpr std::size_t kLanes = 16;

template <typename T, typename F>
double lane_sum(std::size_t count, F term) {
  T acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= count; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += term(i + l);
  double total = 0.0;
  for (; i < count; ++i) total += static_cast<double>(term(i));
  for (std::size_t l = 0; l < kLanes; ++l) total += static_cast<double>(acc[l]);
  return total;
}

template <typename T>
void batchnorm_forward(typename Network<T>::Layer& L, const Tensor<T>& x, Tensor<T>& y, Mode mode) {
  const int n = x.n, c = L.in.c;
  const std::size_t plane = static_cast<std::size_t>(L.in.h) * L.in.w;
  const double m = static_cast<double>(n) * static_cast<double>(plane);
  if (mode == Mode::inference) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
      const T scale = static_cast<T>(static_cast<double>(L.weight[ch]) /
                                     std::sqrt(static_cast<double>(L.running_var[ch]) + kBatchNormEps));
      const T shift = L.bias[ch] - scale * L.running_mean[ch];
      for (int b = 0; b < n; ++b) {
        const T* src = x.sample(b) + ch * plane;
        T* dst = y.sample(b) + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = scale * src[i] + shift;
      }
    }
    return;
  }
  L.xhat.resize(x.data.size());
  L.inv_std.resize(static_cast<std::size_t>(c));
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int b = 0; b < n; ++b) {
      const T* src = x.sample(b) + ch * plane;
      sum += lane_sum<T>(plane, [src](std::size_t i) { return src[i]; });
    }
    const double mean = sum / m;
    const T mean_t = static_cast<T>(mean);
    double sq = 0.0;
    for (int b = 0; b < n; ++b) {
      const T* src = x.sample(b) + ch * plane;
      sq += lane_sum<T>(plane, [src, mean_t](std::size_t i) {
        const T d = src[i] - mean_t;
        return d * d;
      });
    }
    const double var = sq / m;
    const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
    L.inv_std[ch] = static_cast<T>(inv);
    const T gamma = L.weight[ch], beta = L.bias[ch], inv_t = static_cast<T>(inv);
    for (int b = 0; b < n; ++b) {
      const std::size_t off = static_cast<std::size_t>(b) * x.stride() + ch * plane;
      const T* src = x.data.data() + off;
      T* xh = L.xhat.data() + off;
      T* dst = y.data.data() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (src[i] - mean_t) * inv_t;
        dst[i] = gamma * xh[i] + beta;
      }
    }
    if (mode == Mode::training) {
      L.running_mean[ch] = static_cast<T>((1.0 - kRunningMomentum) * L.running_mean[ch] + kRunningMomentum * mean);
      L.running_var[ch] = static_cast<T>((1.0 - kRunningMomentum) * L.running_var[ch] + kRunningMomentum * var);
    } else if (mode == Mode::population) {
      L.pop_sum[ch] += sum;
      L.pop_sq[ch] += sq + m * mean * mean;
    }
  }
  if (mode == Mode::population) L.pop_count += m;
}

template <typename T>
void batchnorm_backward(typename Network<T>::Layer& L, const Tensor<T>& dy, Tensor<T>& dx) {
  const int n = dy.n, c = L.in.c;
  const std::size_t plane = static_cast<std::size_t>(L.in.h) * L.in.w;
  const double m = static_cast<double>(n) * static_cast<double>(plane);
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < n; ++b) {
      const std::size_t off = static_cast<std::size_t>(b) * dy.stride() + ch * plane;
      const T* g = dy.data.data() + off;
      const T* xh = L.xhat.data() + off;
      sum_dy += lane_sum<T>(plane, [g](std::size_t i) { return g[i]; });
      sum_dy_xhat += lane_sum<T>(plane, [g, xh](std::size_t i) { return g[i] * xh[i]; });
    }
    L.dweight[ch] = static_cast<T>(sum_dy_xhat);
    L.dbias[ch] = static_cast<T>(sum_dy);
    const double k = static_cast<double>(L.weight[ch]) * static_cast<double>(L.inv_std[ch]) / m;
    const T k_t = static_cast<T>(k * m), a = static_cast<T>(sum_dy / m), b_t = static_cast<T>(sum_dy_xhat / m);
    for (int b = 0; b < n; ++b) {
      const std::size_t off = static_cast<std::size_t>(b) * dy.stride() + ch * plane;
      const T* g = dy.data.data() + off;
      const T* xh = L.xhat.data() + off;
      T* d = dx.data.data() + off;
      for (std::size_t i = 0; i < plane; ++i) d[i] = k_t * (g[i] - a - xh[i] * b_t);
    }
  }
}

template <typename T>
void maxpool_forward(typename Network<T>::Layer& L, const Tensor<T>& x, Tensor<T>& y) {
  const LayerSpec& s = L.spec;
  const Shape in = L.in, out = L.out;
  L.argmax.resize(y.data.size());
#pragma omp parallel for schedule(static)
  for (int b = 0; b < x.n; ++b) {
    const T* src = x.sample(b);
    T* dst = y.sample(b);
    std::uint32_t* arg = L.argmax.data() + static_cast<std::size_t>(b) * out.size();
    for (int ch = 0; ch < in.c; ++ch)
      for (int oy = 0; oy < out.h; ++oy)
        for (int ox = 0; ox < out.w; ++ox) {
          std::uint32_t best_i = static_cast<std::uint32_t>((ch * in.h + oy * s.stride_h) * in.w + ox * s.stride_w);
          T best = src[best_i];
          for (int ky = 0; ky < s.kernel_h; ++ky)
            for (int kx = 0; kx < s.kernel_w; ++kx) {
              const auto idx =
                  static_cast<std::uint32_t>((ch * in.h + oy * s.stride_h + ky) * in.w + ox * s.stride_w + kx);
              if (src[idx] > best) {
                best = src[idx];
                best_i = idx;
              }
            }
          const std::size_t o = (static_cast<std::size_t>(ch) * out.h + oy) * out.w + ox;
          dst[o] = best;
          arg[o] = best_i;
        }
  }
}

template <typename T>
void maxpool_backward(const typename Network<T>::Layer& L, const Tensor<T>& dy, Tensor<T>& dx) {
  std::fill(dx.data.begin(), dx.data.end(), T{});
#pragma omp parallel for schedule(static)
  for (int b = 0; b < dy.n; ++b) {
    const T* g = dy.sample(b);
    T* d = dx.sample(b);
    const std::uint32_t* arg = L.argmax.data() + static_cast<std::size_t>(b) * L.out.size();
    for (std::size_t o = 0; o < L.out.size(); ++o) d[arg[o]] += g[o];
  }
}

}  // namespace

template <typename T>
std::vector<T> Network<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.shape != spec_.input) throw ShapeError("network expects input " + spec_.input.str() + ", got " + x.shape.str());
  if (x.n < 1) throw ShapeError("empty batch");
  const int n = x.n;
  acts_.resize(layers_.size() + 1);
  acts_[0] = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& L = layers_[i];
    const Tensor<T>& in = acts_[i];
    Tensor<T>& out = acts_[i + 1];
    if (L.spec.kind == LayerKind::softmax) {
      out = in;
      continue;
    }
    out.reshape(n, L.out);
    switch (L.spec.kind) {
      case LayerKind::conv:
        if (backend_ == Backend::parallel) {
          kernels::parallel::conv2d_forward(L.geom, n, in.data.data(), L.weight.data(), L.bias.data(), out.data.data());
        } else {
          for (int b = 0; b < n; ++b)
            kernels::reference::conv2d_forward(L.geom, in.sample(b), L.weight.data(), L.bias.data(), out.sample(b));
        }
        break;
      case LayerKind::batchnorm:
        batchnorm_forward<T>(L, in, out, mode);
        break;
      case LayerKind::relu:
        for (std::size_t k = 0; k < in.data.size(); ++k) out.data[k] = std::max(in.data[k], T{});
        break;
      case LayerKind::maxpool:
        maxpool_forward<T>(L, in, out);
        break;
      case LayerKind::dense: {
        const int fin = static_cast<int>(L.in.size());
        if (backend_ == Backend::parallel)
          kernels::parallel::dense_forward(n, fin, L.spec.units, in.data.data(), L.weight.data(), L.bias.data(),
                                           out.data.data());
        else
          kernels::reference::dense_forward(n, fin, L.spec.units, in.data.data(), L.weight.data(), L.bias.data(),
                                            out.data.data());
        break;
      }
      case LayerKind::softmax:
        break;
    }
  }
  const int k = spec_.num_classes;
  logits_.assign(acts_.back().data.begin(), acts_.back().data.end());
  probs_.resize(logits_.size());
  for (int b = 0; b < n; ++b) {
    const auto row = softmax<T>(std::span<const T>(logits_.data() + static_cast<std::size_t>(b) * k, k));
    std::copy(row.begin(), row.end(), probs_.begin() + static_cast<std::ptrdiff_t>(b) * k);
  }
  return probs_;
}

template <typename T>
T Network<T>::loss(const Tensor<T>& x, std::span<const int> labels, Mode mode) {
  if (labels.size() != static_cast<std::size_t>(x.n)) throw ShapeError("one label per example required");
  forward(x, mode);
  const int k = spec_.num_classes;
  double total = 0.0;
  for (int b = 0; b < x.n; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= k) throw ShapeError("label " + std::to_string(y) + " outside 0.." + std::to_string(k - 1));
    const T* z = logits_.data() + static_cast<std::size_t>(b) * k;
    const double zmax = static_cast<double>(*std::max_element(z, z + k));
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(static_cast<double>(z[j]) - zmax);
    total += zmax + std::log(s) - static_cast<double>(z[y]);
  }
  return static_cast<T>(total / x.n);
}

template <typename T>
T Network<T>::loss_and_gradient(const Tensor<T>& x, std::span<const int> labels, Mode mode) {
  if (mode == Mode::inference) throw std::logic_error("gradients need batch statistics; use training or probe mode");
  const T value = loss(x, labels, mode);
  backward_from_labels(labels);
  return value;
}

template <typename T>
T Network<T>::backward_from_labels(std::span<const int> labels) {
  const int n = acts_[0].n;
  const int k = spec_.num_classes;
  Tensor<T> grad(n, {k, 1, 1});
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < k; ++j) {
      const std::size_t i = static_cast<std::size_t>(b) * k + j;
      grad.data[i] = (probs_[i] - (j == labels[static_cast<std::size_t>(b)] ? T{1} : T{})) / static_cast<T>(n);
    }
  Tensor<T> next;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    Layer& L = layers_[idx];
    const Tensor<T>& in = acts_[idx];
    const Tensor<T>& out = acts_[idx + 1];
    const bool need_input_grad = idx > 0;
    if (L.spec.kind == LayerKind::softmax) continue;
    next.reshape(n, L.in);
    switch (L.spec.kind) {
      case LayerKind::conv:
        if (backend_ == Backend::parallel) {
          kernels::parallel::conv2d_backward(L.geom, n, in.data.data(), grad.data.data(), L.weight.data(),
                                             need_input_grad ? next.data.data() : nullptr, L.dweight.data(),
                                             L.dbias.data());
        } else {
          std::fill(L.dweight.begin(), L.dweight.end(), T{});
          std::fill(L.dbias.begin(), L.dbias.end(), T{});
          for (int b = 0; b < n; ++b) {
            kernels::reference::conv2d_backward_weights(L.geom, in.sample(b), grad.sample(b), L.dweight.data(),
                                                        L.dbias.data());
            if (need_input_grad)
              kernels::reference::conv2d_backward_data(L.geom, grad.sample(b), L.weight.data(), next.sample(b));
          }
        }
        break;
      case LayerKind::batchnorm:
        batchnorm_backward<T>(L, grad, next);
        break;
      case LayerKind::relu:
        for (std::size_t i = 0; i < grad.data.size(); ++i) next.data[i] = out.data[i] > T{} ? grad.data[i] : T{};
        break;
      case LayerKind::maxpool:
        maxpool_backward<T>(L, grad, next);
        break;
      case LayerKind::dense: {
        const int fin = static_cast<int>(L.in.size());
        if (backend_ == Backend::parallel) {
          kernels::parallel::dense_backward(n, fin, L.spec.units, in.data.data(), grad.data.data(), L.weight.data(),
                                            need_input_grad ? next.data.data() : nullptr, L.dweight.data(),
                                            L.dbias.data());
        } else {
          std::fill(L.dweight.begin(), L.dweight.end(), T{});
          std::fill(L.dbias.begin(), L.dbias.end(), T{});
          std::fill(next.data.begin(), next.data.end(), T{});
          for (int b = 0; b < n; ++b)
            for (int o = 0; o < L.spec.units; ++o) {
              const T g = grad.data[static_cast<std::size_t>(b) * L.spec.units + o];
              L.dbias[o] += g;
              for (int i = 0; i < fin; ++i) {
                L.dweight[static_cast<std::size_t>(o) * fin + i] += g * in.data[static_cast<std::size_t>(b) * fin + i];
                next.data[static_cast<std::size_t>(b) * fin + i] += g * L.weight[static_cast<std::size_t>(o) * fin + i];
              }
            }
        }
        break;
      }
      case LayerKind::softmax:
        break;
    }
    std::swap(grad, next);
  }
  return T{};
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::parameters() {
  std::vector<ParamRef<T>> out;
  for (const auto& p : std::as_const(*this).parameters())
    out.push_back({p.name, std::span<T>(const_cast<T*>(p.value.data()), p.value.size()),
                   std::span<T>(const_cast<T*>(p.grad.data()), p.grad.size())});
  return out;
}

template <typename T>
std::vector<StateRef<T>> Network<T>::state() {
  std::vector<StateRef<T>> out;
  for (const auto& p : std::as_const(*this).state())
    out.push_back({p.name, std::span<T>(const_cast<T*>(p.value.data()), p.value.size())});
  return out;
}

template <typename T>
std::vector<ParamRef<const T>> Network<T>::parameters() const {
  std::vector<ParamRef<const T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& L = layers_[i];
    const std::string prefix = "L" + std::to_string(i) + "." + to_string(L.spec.kind) + ".";
    if (L.weight.empty()) continue;
    const bool bn = L.spec.kind == LayerKind::batchnorm;
    out.push_back({prefix + (bn ? "gamma" : "weight"), L.weight, L.dweight});
    out.push_back({prefix + (bn ? "beta" : "bias"), L.bias, L.dbias});
  }
  return out;
}

template <typename T>
std::vector<StateRef<const T>> Network<T>::state() const {
  std::vector<StateRef<const T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& L = layers_[i];
    if (L.spec.kind != LayerKind::batchnorm) continue;
    const std::string prefix = "L" + std::to_string(i) + ".batchnorm.";
    out.push_back({prefix + "running_mean", L.running_mean});
    out.push_back({prefix + "running_var", L.running_var});
  }
  return out;
}

template <typename T>
void Network<T>::begin_population_statistics() {
  for (Layer& L : layers_) {
    if (L.spec.kind != LayerKind::batchnorm) continue;
    L.pop_sum.assign(static_cast<std::size_t>(L.in.c), 0.0);
    L.pop_sq.assign(static_cast<std::size_t>(L.in.c), 0.0);
    L.pop_count = 0.0;
  }
}

template <typename T>
void Network<T>::end_population_statistics() {
  for (Layer& L : layers_) {
    if (L.spec.kind != LayerKind::batchnorm || L.pop_count == 0.0) continue;
    for (int ch = 0; ch < L.in.c; ++ch) {
      const double mean = L.pop_sum[ch] / L.pop_count;
      const double var = std::max(0.0, L.pop_sq[ch] / L.pop_count - mean * mean);
      L.running_mean[ch] = static_cast<T>(mean);
      L.running_var[ch] = static_cast<T>(var);
    }
  }
}

template <typename T>
std::vector<T> softmax(std::span<const T> z) {
  std::vector<T> out(z.size());
  if (z.empty()) return out;
  const double zmax = static_cast<double>(*std::max_element(z.begin(), z.end()));
  double sum = 0.0;
  std::vector<double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) sum += e[i] = std::exp(static_cast<double>(z[i]) - zmax);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = static_cast<T>(e[i] / sum);
  return out;
}

template class Network<float>;
template class Network<double>;
template std::vector<float> softmax<float>(std::span<const float>);
template std::vector<double> softmax<double>(std::span<const double>);

}  // namespace lorafp::nn
