#pragma once

// Convolution and dense kernels in two flavours: `reference` is the plain nested-loop
// definition kept for testing and benchmarking, `parallel` is the batched OpenMP +
// im2col/GEMM path the network uses for training.
//
// Layouts: activations NCHW, conv weights [out_c][in_c][k_h][k_w], dense weights [out][in].
// Stride is 1; padding may differ per side.

#include <cstddef>

namespace lorafp::nn::kernels {

struct ConvGeometry {
  int in_c = 1, in_h = 1, in_w = 1;
  int out_c = 1, k_h = 1, k_w = 1;
  int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;

  int out_h() const noexcept { return in_h + pad_top + pad_bottom - k_h + 1; }
  int out_w() const noexcept { return in_w + pad_left + pad_right - k_w + 1; }
  std::size_t in_size() const noexcept { return static_cast<std::size_t>(in_c) * in_h * in_w; }
  std::size_t out_size() const noexcept { return static_cast<std::size_t>(out_c) * out_h() * out_w(); }
  std::size_t weight_size() const noexcept { return static_cast<std::size_t>(out_c) * in_c * k_h * k_w; }
};

namespace reference {

/// One example. out = conv(in, weight) + bias.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, const T* bias, T* out);

/// One example. din = full correlation of dout with the flipped weights (overwrites din).
template <typename T>
void conv2d_backward_data(const ConvGeometry& g, const T* dout, const T* weight, T* din);

/// One example. Accumulates into dweight and dbias.
template <typename T>
void conv2d_backward_weights(const ConvGeometry& g, const T* in, const T* dout, T* dweight, T* dbias);

/// out[b][o] = sum_i w[o][i] in[b][i] + bias[o]
template <typename T>
void dense_forward(int batch, int in_features, int out_features, const T* in, const T* weight, const T* bias, T* out);

}  // namespace reference

namespace parallel {

template <typename T>
void conv2d_forward(const ConvGeometry& g, int batch, const T* in, const T* weight, const T* bias, T* out);

/// din may be null (first layer). dweight/dbias are overwritten with the batch sum, reduced in
/// example order so results do not depend on the thread count.
template <typename T>
void conv2d_backward(const ConvGeometry& g, int batch, const T* in, const T* dout, const T* weight, T* din, T* dweight,
                     T* dbias);

template <typename T>
void dense_forward(int batch, int in_features, int out_features, const T* in, const T* weight, const T* bias, T* out);

/// dweight/dbias overwritten; din may be null.
template <typename T>
void dense_backward(int batch, int in_features, int out_features, const T* in, const T* dout, const T* weight, T* din,
                    T* dweight, T* dbias);

}  // namespace parallel

}  // namespace lorafp::nn::kernels
