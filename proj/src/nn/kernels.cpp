#include "lorafp/nn/kernels.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "lorafp/nn/aligned.hpp"

namespace lorafp::nn::kernels {

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, const T* bias, T* out) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int oc = 0; oc < g.out_c; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = bias != nullptr ? bias[oc] : T{};
        for (int ic = 0; ic < g.in_c; ++ic) {
          for (int ky = 0; ky < g.k_h; ++ky) {
            const int iy = oy + ky - g.pad_top;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int ix = ox + kx - g.pad_left;
              if (ix < 0 || ix >= g.in_w) continue;
              acc += weight[((oc * g.in_c + ic) * g.k_h + ky) * g.k_w + kx] * in[(ic * g.in_h + iy) * g.in_w + ix];
            }
          }
        }
        out[(oc * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

template <typename T>
void conv2d_backward_data(const ConvGeometry& g, const T* dout, const T* weight, T* din) {
  const int oh = g.out_h(), ow = g.out_w();
  std::fill(din, din + g.in_size(), T{});
  for (int oc = 0; oc < g.out_c; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const T d = dout[(oc * oh + oy) * ow + ox];
        for (int ic = 0; ic < g.in_c; ++ic)
          for (int ky = 0; ky < g.k_h; ++ky) {
            const int iy = oy + ky - g.pad_top;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int ix = ox + kx - g.pad_left;
              if (ix < 0 || ix >= g.in_w) continue;
              din[(ic * g.in_h + iy) * g.in_w + ix] += d * weight[((oc * g.in_c + ic) * g.k_h + ky) * g.k_w + kx];
            }
          }
      }
}

template <typename T>
void conv2d_backward_weights(const ConvGeometry& g, const T* in, const T* dout, T* dweight, T* dbias) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int oc = 0; oc < g.out_c; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const T d = dout[(oc * oh + oy) * ow + ox];
        if (dbias != nullptr) dbias[oc] += d;
        for (int ic = 0; ic < g.in_c; ++ic)
          for (int ky = 0; ky < g.k_h; ++ky) {
            const int iy = oy + ky - g.pad_top;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int ix = ox + kx - g.pad_left;
              if (ix < 0 || ix >= g.in_w) continue;
              dweight[((oc * g.in_c + ic) * g.k_h + ky) * g.k_w + kx] += d * in[(ic * g.in_h + iy) * g.in_w + ix];
            }
          }
      }
}

template <typename T>
void dense_forward(int batch, int in_features, int out_features, const T* in, const T* weight, const T* bias, T* out) {
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < out_features; ++o) {
      T acc = bias != nullptr ? bias[o] : T{};
      for (int i = 0; i < in_features; ++i)
        acc +=
            weight[static_cast<std::size_t>(o) * in_features + i] * in[static_cast<std::size_t>(b) * in_features + i];
      out[static_cast<std::size_t>(b) * out_features + o] = acc;
    }
}

}  // namespace reference

namespace parallel {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// col is (in_c*k_h*k_w) x (out_h*out_w)
template <typename T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int ic = 0; ic < g.in_c; ++ic)
    for (int ky = 0; ky < g.k_h; ++ky)
      for (int kx = 0; kx < g.k_w; ++kx) {
        T* row = col + (static_cast<std::size_t>((ic * g.k_h + ky) * g.k_w + kx)) * plane;
        const int x_lo = std::max(0, g.pad_left - kx);
        const int x_hi = std::min(ow, g.in_w + g.pad_left - kx);
        for (int oy = 0; oy < oh; ++oy) {
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          const int iy = oy + ky - g.pad_top;
          if (iy < 0 || iy >= g.in_h || x_lo >= x_hi) {
            std::fill(dst, dst + ow, T{});
            continue;
          }
          const T* src = in + (static_cast<std::size_t>(ic) * g.in_h + iy) * g.in_w;
          const int shift = kx - g.pad_left;
          std::fill(dst, dst + x_lo, T{});
          std::copy(src + x_lo + shift, src + x_hi + shift, dst + x_lo);
          std::fill(dst + x_hi, dst + ow, T{});
        }
      }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* din) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  std::fill(din, din + g.in_size(), T{});
  for (int ic = 0; ic < g.in_c; ++ic)
    for (int ky = 0; ky < g.k_h; ++ky)
      for (int kx = 0; kx < g.k_w; ++kx) {
        const T* row = col + (static_cast<std::size_t>((ic * g.k_h + ky) * g.k_w + kx)) * plane;
        const int x_lo = std::max(0, g.pad_left - kx);
        const int x_hi = std::min(ow, g.in_w + g.pad_left - kx);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy + ky - g.pad_top;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          T* dst = din + (static_cast<std::size_t>(ic) * g.in_h + iy) * g.in_w;
          const int shift = kx - g.pad_left;
          for (int ox = x_lo; ox < x_hi; ++ox) dst[ox + shift] += src[ox];
        }
      }
}

std::size_t col_size(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.in_c) * g.k_h * g.k_w * static_cast<std::size_t>(g.out_h()) * g.out_w();
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, int batch, const T* in, const T* weight, const T* bias, T* out) {
  const int rows = g.in_c * g.k_h * g.k_w;
  const int plane = g.out_h() * g.out_w();
  const ConstMapMat<T> w(weight, g.out_c, rows);
#pragma omp parallel
  {
    AlignedVector<T> col(col_size(g));
#pragma omp for schedule(static)
    for (int b = 0; b < batch; ++b) {
      im2col(g, in + static_cast<std::size_t>(b) * g.in_size(), col.data());
      MapMat<T> y(out + static_cast<std::size_t>(b) * g.out_size(), g.out_c, plane);
      y.noalias() = w * ConstMapMat<T>(col.data(), rows, plane);
      if (bias != nullptr)
        for (int oc = 0; oc < g.out_c; ++oc) y.row(oc).array() += bias[oc];
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, int batch, const T* in, const T* dout, const T* weight, T* din, T* dweight,
                     T* dbias) {
  const int rows = g.in_c * g.k_h * g.k_w;
  const int plane = g.out_h() * g.out_w();
  const std::size_t wsize = g.weight_size();
  const ConstMapMat<T> w(weight, g.out_c, rows);
  // per-example gradients, summed afterwards in example order
  AlignedVector<T> dw_each(static_cast<std::size_t>(batch) * wsize);
  AlignedVector<T> db_each(static_cast<std::size_t>(batch) * g.out_c);
#pragma omp parallel
  {
    AlignedVector<T> col(col_size(g));
#pragma omp for schedule(static)
    for (int b = 0; b < batch; ++b) {
      const ConstMapMat<T> dy(dout + static_cast<std::size_t>(b) * g.out_size(), g.out_c, plane);
      im2col(g, in + static_cast<std::size_t>(b) * g.in_size(), col.data());
      MapMat<T> dw(dw_each.data() + static_cast<std::size_t>(b) * wsize, g.out_c, rows);
      dw.noalias() = dy * ConstMapMat<T>(col.data(), rows, plane).transpose();
      for (int oc = 0; oc < g.out_c; ++oc) db_each[static_cast<std::size_t>(b) * g.out_c + oc] = dy.row(oc).sum();
      if (din != nullptr) {
        MapMat<T> dcol(col.data(), rows, plane);
        dcol.noalias() = w.transpose() * dy;
        col2im(g, col.data(), din + static_cast<std::size_t>(b) * g.in_size());
      }
    }
  }
  std::fill(dweight, dweight + wsize, T{});
  std::fill(dbias, dbias + g.out_c, T{});
  for (int b = 0; b < batch; ++b) {
    const T* dw = dw_each.data() + static_cast<std::size_t>(b) * wsize;
    for (std::size_t i = 0; i < wsize; ++i) dweight[i] += dw[i];
    for (int oc = 0; oc < g.out_c; ++oc) dbias[oc] += db_each[static_cast<std::size_t>(b) * g.out_c + oc];
  }
}

template <typename T>
void dense_forward(int batch, int in_features, int out_features, const T* in, const T* weight, const T* bias, T* out) {
  MapMat<T> y(out, batch, out_features);
  y.noalias() = ConstMapMat<T>(in, batch, in_features) * ConstMapMat<T>(weight, out_features, in_features).transpose();
  if (bias != nullptr)
    for (int o = 0; o < out_features; ++o) y.col(o).array() += bias[o];
}

template <typename T>
void dense_backward(int batch, int in_features, int out_features, const T* in, const T* dout, const T* weight, T* din,
                    T* dweight, T* dbias) {
  const ConstMapMat<T> dy(dout, batch, out_features);
  MapMat<T>(dweight, out_features, in_features).noalias() = dy.transpose() * ConstMapMat<T>(in, batch, in_features);
  for (int o = 0; o < out_features; ++o) dbias[o] = dy.col(o).sum();
  if (din != nullptr)
    MapMat<T>(din, batch, in_features).noalias() = dy * ConstMapMat<T>(weight, out_features, in_features);
}

}  // namespace parallel

#define LORAFP_INSTANTIATE(T)                                                                                     \
  template void reference::conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);              \
  template void reference::conv2d_backward_data<T>(const ConvGeometry&, const T*, const T*, T*);                  \
  template void reference::conv2d_backward_weights<T>(const ConvGeometry&, const T*, const T*, T*, T*);           \
  template void reference::dense_forward<T>(int, int, int, const T*, const T*, const T*, T*);                     \
  template void parallel::conv2d_forward<T>(const ConvGeometry&, int, const T*, const T*, const T*, T*);          \
  template void parallel::conv2d_backward<T>(const ConvGeometry&, int, const T*, const T*, const T*, T*, T*, T*); \
  template void parallel::dense_forward<T>(int, int, int, const T*, const T*, const T*, T*);                      \
  template void parallel::dense_backward<T>(int, int, int, const T*, const T*, const T*, T*, T*, T*);

LORAFP_INSTANTIATE(float)
LORAFP_INSTANTIATE(double)

#undef LORAFP_INSTANTIATE

}  // namespace lorafp::nn::kernels
