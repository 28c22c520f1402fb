#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lorafp/error.hpp"
#include "lorafp/phy.hpp"
#include "oracles.hpp"

using namespace lorafp;

TEST_CASE("symbol length at the standard rates") {
  LoRaParams p;
  CHECK(symbol_length(p) == 1024);
  p.ts = 8e-6;
  CHECK(symbol_length(p) == 128);
  p.ts = 3e-6;
  CHECK_THROWS_AS(symbol_length(p), ConfigError);
}

TEST_CASE("symbol length doubles with each spreading factor step") {
  for (int sf = 7; sf < 12; ++sf) {
    LoRaParams a, b;
    a.sf = sf;
    b.sf = sf + 1;
    CHECK(symbol_length(b) == 2 * symbol_length(a));
  }
}

TEST_CASE("parameter validation") {
  LoRaParams p;
  CHECK_NOTHROW(p.validate());
  p.sf = 6;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.sf = 13;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.n_preambles = 1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.ts = 1.0 / 100e3;  // below the bandwidth
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.bw = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(LoRaParams{}.fine_cfo_limit() == doctest::Approx(488.28125));
}

TEST_CASE("complex signal rejects invalid samples") {
  CHECK_THROWS_AS(ComplexSignal({}, 1e-6), SignalError);
  CHECK_THROWS_AS(ComplexSignal({cplx{1, 0}}, 0.0), SignalError);
  CHECK_THROWS_AS(ComplexSignal({cplx{std::nan(""), 0}}, 1e-6), SignalError);
  CHECK_THROWS_AS(ComplexSignal({cplx{1, 0}, cplx{INFINITY, 0}}, 1e-6), SignalError);
  const ComplexSignal s({cplx{1, 0}, cplx{2, 0}, cplx{3, 0}}, 1e-6);
  CHECK(s.slice(1, 2)[0] == cplx{2, 0});
  CHECK_THROWS(s.slice(2, 2));
}

TEST_CASE("basic chirp starts at 1 and has constant modulus") {
  for (int sf = 7; sf <= 12; ++sf)
    for (double ts : {1e-6, 8e-6 / 4, 8e-6}) {
      LoRaParams p;
      p.sf = sf;
      p.ts = ts;
      const double a = 0.7;
      const ComplexSignal u = basic_chirp(p, a);
      REQUIRE(u.size() == symbol_length(p));
      CHECK(u[0] == cplx{a, 0.0});
      for (std::size_t n = 0; n < u.size(); ++n) REQUIRE(std::abs(std::abs(u[n]) - a) / a < 1e-12);
    }
}

TEST_CASE("basic chirp matches the continuous-time definition") {
  for (int sf : {7, 9, 12}) {
    LoRaParams p;
    p.sf = sf;
    const auto ref = oracle::chirp(p);
    const ComplexSignal u = basic_chirp(p);
    double worst = 0.0;
    for (std::size_t n = 0; n < ref.size(); ++n) worst = std::max(worst, std::abs(u[n] - ref[n]));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("discriminator of the chirp follows the analytic ramp") {
  for (int sf : {7, 8, 10}) {
    LoRaParams p;
    p.sf = sf;
    const auto l = symbol_length(p);
    const auto f = instantaneous_frequency(basic_chirp(p));
    REQUIRE(f.size() == l - 1);
    double worst = 0.0;
    for (std::size_t n = 0; n + 1 < l; ++n)
      worst = std::max(worst, std::abs(f[n] - oracle::chirp_frequency(p, static_cast<double>(n) * p.ts)));
    CHECK(worst <= p.bw / (2.0 * static_cast<double>(l)) * (1.0 + 1e-9));
    // The phase difference measures the frequency half a sample later exactly.
    for (std::size_t n = 0; n + 1 < l; ++n)
      REQUIRE(f[n] == doctest::Approx(oracle::chirp_frequency(p, (static_cast<double>(n) + 0.5) * p.ts)).epsilon(1e-7));
  }
}

TEST_CASE("discriminator of a tone and of a constant") {
  std::vector<cplx> tone(1000), flat(50, cplx{1.0, 0.0});
  for (std::size_t n = 0; n < tone.size(); ++n) tone[n] = std::polar(1.0, 2.0 * std::numbers::pi * 1000.0 * n * 1e-6);
  for (double f : instantaneous_frequency(ComplexSignal(tone, 1e-6)))
    REQUIRE(f == doctest::Approx(1000.0).epsilon(1e-9));
  for (double f : instantaneous_frequency(ComplexSignal(flat, 1e-6))) REQUIRE(f == 0.0);
}

TEST_CASE("discriminator range and errors") {
  // A half-turn per sample maps to the lower edge of the half-open range.
  const ComplexSignal alt({cplx{1, 0}, cplx{-1, 0}, cplx{1, 0}}, 1e-6);
  for (double f : instantaneous_frequency(alt)) CHECK(f == doctest::Approx(-0.5e6));
  CHECK_THROWS_AS(instantaneous_frequency(ComplexSignal({cplx{1, 0}}, 1e-6)), SignalError);
  CHECK_THROWS_AS(instantaneous_frequency(ComplexSignal({cplx{1, 0}, cplx{0, 0}, cplx{1, 0}}, 1e-6)), SignalError);
}

TEST_CASE("preamble repeats the basic chirp bit-exactly") {
  for (int n_pre : {2, 8}) {
    LoRaParams p;
    p.n_preambles = n_pre;
    const ComplexSignal pre = preamble_sequence(p);
    const ComplexSignal u = basic_chirp(p);
    REQUIRE(pre.size() == static_cast<std::size_t>(n_pre) * u.size());
    for (int k = 0; k < n_pre; ++k)
      for (std::size_t n = 0; n < u.size(); ++n) REQUIRE(pre[k * u.size() + n] == u[n]);
  }
  CHECK(preamble_sequence(LoRaParams{}).size() == 8192);
}
