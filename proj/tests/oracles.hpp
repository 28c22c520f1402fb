#pragma once

// Direct-by-definition references used to check the optimized implementations.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "lorafp/nn/kernels.hpp"
#include "lorafp/phy.hpp"

namespace oracle {

using lorafp::cplx;

/// O(N^2) DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N), with exact integer phase reduction.
inline std::vector<cplx> dft(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<long double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long double angle = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * i) % n) / n;
      acc += std::complex<long double>(x[i].real(), x[i].imag()) *
             std::complex<long double>(std::cos(angle), std::sin(angle));
    }
    out[k] = cplx(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
  }
  return out;
}

/// Chirp from its continuous-time definition A exp(j(-pi B t + pi (B/T) t^2)), evaluated in long double.
inline std::vector<cplx> chirp(const lorafp::LoRaParams& p, double amplitude = 1.0) {
  const long double b = p.bw, ts = p.ts, t_sym = std::ldexp(1.0L, p.sf) / b;
  const std::size_t l = static_cast<std::size_t>(std::llround(static_cast<double>(t_sym / ts)));
  std::vector<cplx> out(l);
  for (std::size_t n = 0; n < l; ++n) {
    const long double t = n * ts;
    const long double phase =
        -std::numbers::pi_v<long double> * b * t + std::numbers::pi_v<long double> * (b / t_sym) * t * t;
    out[n] = std::polar(amplitude, static_cast<double>(std::fmod(phase, 2.0L * std::numbers::pi_v<long double>)));
  }
  return out;
}

/// Instantaneous frequency of the continuous chirp at t, -B/2 + (B/T) t.
inline double chirp_frequency(const lorafp::LoRaParams& p, double t) {
  return -p.bw / 2.0 + p.bw * p.bw / std::ldexp(1.0, p.sf) * t;
}

inline double max_abs(const std::vector<cplx>& a) {
  double m = 0.0;
  for (const cplx& v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Squared magnitudes of the dc-centered DFT of every window, rows are frequency bins.
inline std::vector<std::vector<double>> stft_power(const std::vector<cplx>& x, std::size_t m, std::size_t hop) {
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start + m <= x.size(); start += hop) {
    const std::vector<cplx> bins =
        dft({x.begin() + static_cast<std::ptrdiff_t>(start), x.begin() + static_cast<std::ptrdiff_t>(start + m)});
    std::vector<double> col(m);
    for (std::size_t k = 0; k < m; ++k) col[k] = std::norm(bins[(k + (m + 1) / 2) % m]);
    out.push_back(std::move(col));
  }
  return out;
}

/// Stride-1 convolution straight from its definition, accumulated in long double.
struct Conv {
  lorafp::nn::kernels::ConvGeometry g;

  long double in_at(const std::vector<double>& in, int c, int y, int x) const {
    const int r = y - g.pad_top, s = x - g.pad_left;
    if (r < 0 || r >= g.in_h || s < 0 || s >= g.in_w) return 0.0L;
    return in[(static_cast<std::size_t>(c) * g.in_h + r) * g.in_w + s];
  }
  std::size_t widx(int o, int i, int a, int b) const {
    return ((static_cast<std::size_t>(o) * g.in_c + i) * g.k_h + a) * g.k_w + b;
  }
  std::size_t oidx(int o, int y, int x) const { return (static_cast<std::size_t>(o) * g.out_h() + y) * g.out_w() + x; }

  std::vector<double> forward(const std::vector<double>& in, const std::vector<double>& w,
                              const std::vector<double>& bias) const {
    std::vector<double> out(g.out_size());
    for (int o = 0; o < g.out_c; ++o)
      for (int y = 0; y < g.out_h(); ++y)
        for (int x = 0; x < g.out_w(); ++x) {
          long double acc = bias[o];
          for (int i = 0; i < g.in_c; ++i)
            for (int a = 0; a < g.k_h; ++a)
              for (int b = 0; b < g.k_w; ++b) acc += w[widx(o, i, a, b)] * in_at(in, i, y + a, x + b);
          out[oidx(o, y, x)] = static_cast<double>(acc);
        }
    return out;
  }

  std::vector<double> dweight(const std::vector<double>& in, const std::vector<double>& dout) const {
    std::vector<double> dw(g.weight_size());
    for (int o = 0; o < g.out_c; ++o)
      for (int i = 0; i < g.in_c; ++i)
        for (int a = 0; a < g.k_h; ++a)
          for (int b = 0; b < g.k_w; ++b) {
            long double acc = 0;
            for (int y = 0; y < g.out_h(); ++y)
              for (int x = 0; x < g.out_w(); ++x) acc += dout[oidx(o, y, x)] * in_at(in, i, y + a, x + b);
            dw[widx(o, i, a, b)] = static_cast<double>(acc);
          }
    return dw;
  }

  std::vector<double> din(const std::vector<double>& dout, const std::vector<double>& w) const {
    std::vector<double> d(g.in_size());
    for (int i = 0; i < g.in_c; ++i)
      for (int r = 0; r < g.in_h; ++r)
        for (int s = 0; s < g.in_w; ++s) {
          long double acc = 0;
          for (int o = 0; o < g.out_c; ++o)
            for (int a = 0; a < g.k_h; ++a)
              for (int b = 0; b < g.k_w; ++b) {
                const int y = r + g.pad_top - a, x = s + g.pad_left - b;
                if (y >= 0 && y < g.out_h() && x >= 0 && x < g.out_w())
                  acc += dout[oidx(o, y, x)] * w[widx(o, i, a, b)];
              }
          d[(static_cast<std::size_t>(i) * g.in_h + r) * g.in_w + s] = static_cast<double>(acc);
        }
    return d;
  }
};

}  // namespace oracle
