#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lorafp/nn/kernels.hpp"
#include "lorafp/nn/tensor.hpp"

namespace lorafp::nn {

enum class LayerKind { conv, batchnorm, relu, maxpool, dense, softmax };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int filters = 0;                 ///< conv output channels
  int kernel_h = 0, kernel_w = 0;  ///< conv kernel or pooling window
  int stride_h = 1, stride_w = 1;  ///< pooling stride (convolutions use stride 1)
  int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
  int units = 0;  ///< dense outputs

  static LayerSpec conv(int filters, int kh, int kw, int pad_top = 0, int pad_bottom = 0, int pad_left = 0,
                        int pad_right = 0);
  static LayerSpec batchnorm();
  static LayerSpec relu();
  static LayerSpec maxpool(int kh, int kw, int sh, int sw);
  static LayerSpec dense(int units);
  static LayerSpec softmax();

  bool operator==(const LayerSpec&) const = default;
};

struct CnnSpec {
  std::string name;
  Shape input;
  int num_classes = 0;
  std::vector<LayerSpec> layers;

  /// conv(3x3, same) -> batchnorm -> relu -> maxpool(2x2, stride 2), three times; dense; softmax.
  static CnnSpec spectrogram(Shape input, int num_classes, std::array<int, 3> filters = {8, 16, 32}, int kernel = 3);

  /// conv 1xk1 / 2xk2 / 2xk3, each followed by batchnorm + relu; 1xpool max pooling after the first two;
  /// dense; softmax. Width is unpadded, height keeps the two I/Q rows (one padding row at the bottom).
  static CnnSpec iq_fft(Shape input, int num_classes, std::array<int, 3> filters = {8, 16, 32},
                        std::array<int, 3> kernel_w = {128, 128, 128}, int pool = 4);

  /// dense -> softmax on the flattened input.
  static CnnSpec dense_only(Shape input, int num_classes);

  /// Output shape after every layer. Throws ShapeError when a layer does not fit its input.
  std::vector<Shape> shapes() const;
  std::size_t parameter_count() const;

  bool operator==(const CnnSpec&) const = default;
};

enum class Mode {
  inference,   ///< batchnorm uses the stored population statistics
  training,    ///< batch statistics; running statistics updated
  probe,       ///< batch statistics; nothing updated (gradient checking, loss probes)
  population,  ///< batch statistics; accumulates population statistics
};

enum class Backend { parallel, reference };

template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
};

template <typename T>
struct StateRef {
  std::string name;
  std::span<T> value;
};

template <typename T>
class Network {
 public:
  Network();
  /// He-normal weights, zero biases, gamma = 1, beta = 0.
  explicit Network(CnnSpec spec, std::uint64_t seed = 0);

  const CnnSpec& spec() const noexcept { return spec_; }
  int num_classes() const noexcept { return spec_.num_classes; }

  /// Softmax probabilities, batch x num_classes row-major.
  std::vector<T> forward(const Tensor<T>& x, Mode mode = Mode::inference);
  /// Logits of the last forward call, batch x num_classes.
  const std::vector<T>& logits() const noexcept { return logits_; }

  /// Mean cross-entropy of the batch; labels are class indices.
  T loss(const Tensor<T>& x, std::span<const int> labels, Mode mode = Mode::probe);
  /// Forward + backward; gradients land in parameters()[i].grad.
  T loss_and_gradient(const Tensor<T>& x, std::span<const int> labels, Mode mode = Mode::training);

  std::vector<ParamRef<T>> parameters();
  std::vector<ParamRef<const T>> parameters() const;
  /// Batchnorm population statistics.
  std::vector<StateRef<T>> state();
  std::vector<StateRef<const T>> state() const;

  void begin_population_statistics();
  void end_population_statistics();

  void set_backend(Backend b) noexcept { backend_ = b; }
  Backend backend() const noexcept { return backend_; }

  struct Layer;  // defined in network.cpp

  Network(const Network&);
  Network& operator=(const Network&);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

 private:
  T backward_from_labels(std::span<const int> labels);

  CnnSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<Layer> layers_;
  std::vector<Tensor<T>> acts_;
  std::vector<T> logits_;
  std::vector<T> probs_;
  Backend backend_ = Backend::parallel;
};

/// Numerically stable softmax of one row.
template <typename T>
std::vector<T> softmax(std::span<const T> z);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace lorafp::nn
