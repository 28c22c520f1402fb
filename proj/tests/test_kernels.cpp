#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lorafp/nn/kernels.hpp"
#include "oracles.hpp"

using namespace lorafp::nn::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> v(n);
  for (T& x : v) x = static_cast<T>(u(rng));
  return v;
}

double rel_err(const double* got, const std::vector<double>& want) {
  double scale = 1e-300, worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    scale = std::max(scale, std::abs(want[i]));
    worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  return worst / scale;
}

std::vector<ConvGeometry> geometries() {
  std::vector<ConvGeometry> gs;
  gs.push_back({1, 8, 8, 1, 3, 3, 1, 1, 1, 1});
  gs.push_back({2, 8, 8, 3, 3, 3, 1, 1, 1, 1});
  gs.push_back({3, 8, 8, 2, 3, 3, 0, 0, 0, 0});
  gs.push_back({1, 2, 8, 4, 1, 4, 0, 0, 0, 0});
  gs.push_back({4, 1, 8, 2, 2, 3, 0, 1, 0, 0});
  gs.push_back({2, 5, 7, 3, 2, 5, 1, 0, 2, 1});
  return gs;
}

}  // namespace

TEST_CASE("convolution kernels match the nested-loop definition") {
  const int batch = 3;
  std::uint64_t seed = 1;
  for (const ConvGeometry& g : geometries()) {
    CAPTURE(g.in_c);
    CAPTURE(g.k_h);
    CAPTURE(g.k_w);
    const oracle::Conv oracle{g};
    const auto in = random_vec<double>(batch * g.in_size(), seed++);
    const auto w = random_vec<double>(g.weight_size(), seed++);
    const auto bias = random_vec<double>(static_cast<std::size_t>(g.out_c), seed++);
    const auto dout = random_vec<double>(batch * g.out_size(), seed++);

    std::vector<double> out_ref(batch * g.out_size()), out_par(batch * g.out_size());
    parallel::conv2d_forward(g, batch, in.data(), w.data(), bias.data(), out_par.data());
    std::vector<double> dw_ref(g.weight_size(), 0.0), db_ref(g.out_c, 0.0), din_ref(batch * g.in_size());
    std::vector<double> dw_par(g.weight_size(), 7.0), db_par(g.out_c, 7.0), din_par(batch * g.in_size(), 7.0);
    parallel::conv2d_backward(g, batch, in.data(), dout.data(), w.data(), din_par.data(), dw_par.data(), db_par.data());

    std::vector<double> dw_sum(g.weight_size(), 0.0), db_sum(g.out_c, 0.0);
    for (int b = 0; b < batch; ++b) {
      const std::vector<double> x(in.begin() + b * g.in_size(), in.begin() + (b + 1) * g.in_size());
      const std::vector<double> d(dout.begin() + b * g.out_size(), dout.begin() + (b + 1) * g.out_size());
      const auto fwd = oracle.forward(x, w, bias);
      reference::conv2d_forward(g, x.data(), w.data(), bias.data(), out_ref.data() + b * g.out_size());
      CHECK(rel_err(out_ref.data() + b * g.out_size(), fwd) < 1e-9);
      CHECK(rel_err(out_par.data() + b * g.out_size(), fwd) < 1e-9);

      const auto dx = oracle.din(d, w);
      reference::conv2d_backward_data(g, d.data(), w.data(), din_ref.data() + b * g.in_size());
      CHECK(rel_err(din_ref.data() + b * g.in_size(), dx) < 1e-9);
      CHECK(rel_err(din_par.data() + b * g.in_size(), dx) < 1e-9);

      const auto dw = oracle.dweight(x, d);
      for (std::size_t k = 0; k < dw.size(); ++k) dw_sum[k] += dw[k];
      for (int o = 0; o < g.out_c; ++o)
        for (int p = 0; p < g.out_h() * g.out_w(); ++p)
          db_sum[o] += d[static_cast<std::size_t>(o) * g.out_h() * g.out_w() + p];
      reference::conv2d_backward_weights(g, x.data(), d.data(), dw_ref.data(), db_ref.data());
    }
    CHECK(rel_err(dw_ref.data(), dw_sum) < 1e-9);
    CHECK(rel_err(dw_par.data(), dw_sum) < 1e-9);
    CHECK(rel_err(db_ref.data(), db_sum) < 1e-9);
    CHECK(rel_err(db_par.data(), db_sum) < 1e-9);
  }
}

TEST_CASE("convolution of a delta reproduces the kernel") {
  const ConvGeometry g{1, 8, 8, 1, 3, 3, 1, 1, 1, 1};
  std::vector<double> in(64, 0.0);
  in[3 * 8 + 4] = 1.0;
  const std::vector<double> w{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<double> bias{0.5};
  std::vector<double> out(64);
  reference::conv2d_forward(g, in.data(), w.data(), bias.data(), out.data());
  // Correlation places the flipped kernel around the impulse.
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const int a = 3 - y + 1, b = 4 - x + 1;
      const double expected = (a >= 0 && a < 3 && b >= 0 && b < 3) ? w[static_cast<std::size_t>(a * 3 + b)] + 0.5 : 0.5;
      CHECK(out[static_cast<std::size_t>(y * 8 + x)] == expected);
    }
}

TEST_CASE("dense kernels match the definition") {
  const int batch = 5, nin = 13, nout = 4;
  const auto in = random_vec<double>(batch * nin, 40);
  const auto w = random_vec<double>(nout * nin, 41);
  const auto bias = random_vec<double>(nout, 42);
  const auto dout = random_vec<double>(batch * nout, 43);
  std::vector<double> out_ref(batch * nout), out_par(batch * nout), din(batch * nin), dw(nout * nin), db(nout);
  reference::dense_forward(batch, nin, nout, in.data(), w.data(), bias.data(), out_ref.data());
  parallel::dense_forward(batch, nin, nout, in.data(), w.data(), bias.data(), out_par.data());
  parallel::dense_backward(batch, nin, nout, in.data(), dout.data(), w.data(), din.data(), dw.data(), db.data());
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < nout; ++o) {
      long double acc = bias[o];
      for (int i = 0; i < nin; ++i) acc += w[o * nin + i] * in[b * nin + i];
      CHECK(out_ref[b * nout + o] == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
      CHECK(out_par[b * nout + o] == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
    }
  for (int o = 0; o < nout; ++o) {
    long double sb = 0;
    for (int b = 0; b < batch; ++b) sb += dout[b * nout + o];
    CHECK(db[o] == doctest::Approx(static_cast<double>(sb)).epsilon(1e-12));
    for (int i = 0; i < nin; ++i) {
      long double s = 0;
      for (int b = 0; b < batch; ++b) s += dout[b * nout + o] * in[b * nin + i];
      CHECK(dw[o * nin + i] == doctest::Approx(static_cast<double>(s)).epsilon(1e-12));
    }
  }
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < nin; ++i) {
      long double s = 0;
      for (int o = 0; o < nout; ++o) s += dout[b * nout + o] * w[o * nin + i];
      CHECK(din[b * nin + i] == doctest::Approx(static_cast<double>(s)).epsilon(1e-12));
    }
}

TEST_CASE("single-precision parallel kernels agree with the reference loops") {
  const ConvGeometry g{4, 16, 20, 8, 3, 3, 1, 1, 1, 1};
  const int batch = 6;
  const auto in = random_vec<float>(batch * g.in_size(), 50);
  const auto w = random_vec<float>(g.weight_size(), 51);
  const auto bias = random_vec<float>(g.out_c, 52);
  std::vector<float> out_par(batch * g.out_size()), out_ref(g.out_size());
  parallel::conv2d_forward(g, batch, in.data(), w.data(), bias.data(), out_par.data());
  float worst = 0.0f;
  for (int b = 0; b < batch; ++b) {
    reference::conv2d_forward(g, in.data() + b * g.in_size(), w.data(), bias.data(), out_ref.data());
    for (std::size_t k = 0; k < g.out_size(); ++k)
      worst = std::max(worst, std::abs(out_ref[k] - out_par[b * g.out_size() + k]));
  }
  CHECK(worst < 1e-4f);
}

TEST_CASE("parallel backward without an input gradient") {
  const ConvGeometry g{2, 6, 6, 3, 3, 3, 1, 1, 1, 1};
  const int batch = 2;
  const auto in = random_vec<double>(batch * g.in_size(), 60);
  const auto w = random_vec<double>(g.weight_size(), 61);
  const auto dout = random_vec<double>(batch * g.out_size(), 62);
  std::vector<double> dw1(g.weight_size()), db1(g.out_c), dw2(g.weight_size()), db2(g.out_c), din(batch * g.in_size());
  parallel::conv2d_backward(g, batch, in.data(), dout.data(), w.data(), static_cast<double*>(nullptr), dw1.data(),
                            db1.data());
  parallel::conv2d_backward(g, batch, in.data(), dout.data(), w.data(), din.data(), dw2.data(), db2.data());
  CHECK(dw1 == dw2);
  CHECK(db1 == db2);
}
