#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "lorafp/dataset.hpp"
#include "lorafp/devsim.hpp"
#include "lorafp/error.hpp"
#include "lorafp/seeding.hpp"
#include "test_util.hpp"

using namespace lorafp;

namespace {

DeviceProfile drifting_profile() {
  DeviceProfile p = DeviceProfile::identity(3);
  p.cfo_base = 1500.0;
  p.cfo_warmup_amp = 300.0;
  p.cfo_warmup_tau = 400.0;
  p.cfo_day_sigma = 100.0;
  p.cfo_jitter_sigma = 10.0;
  return p;
}

}  // namespace

TEST_CASE("cfo_at with all variation disabled is the base offset") {
  DeviceProfile p = DeviceProfile::identity(1);
  p.cfo_base = -4321.5;
  for (int session : {1, 2, 7})
    for (double t : {0.0, 10.0, 5000.0}) CHECK(cfo_at(p, {session, t, 30.0, 99}) == -4321.5);
}

TEST_CASE("cfo_at warm-up decays to base plus day offset") {
  DeviceProfile p = drifting_profile();
  p.cfo_jitter_sigma = 0.0;
  const double settled = p.cfo_base + day_offset(p, 2);
  CHECK(cfo_at(p, {2, 1e7, 30.0, 1}) == doctest::Approx(settled).epsilon(1e-15));
  // 300 Hz with tau = 400 s, 1200 s after power-on: 300 e^-3.
  CHECK(cfo_at(p, {2, 1200.0, 30.0, 1}) - settled == doctest::Approx(300.0 * std::exp(-3.0)).epsilon(1e-12));
  CHECK(300.0 * std::exp(-3.0) == doctest::Approx(14.936).epsilon(1e-4));
}

TEST_CASE("cfo_at decreases monotonically during warm-up without jitter") {
  DeviceProfile p = drifting_profile();
  p.cfo_jitter_sigma = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3000; k += 7) {
    const double f = cfo_at(p, {1, static_cast<double>(k), 30.0, static_cast<std::uint64_t>(k)});
    REQUIRE(f < prev);
    prev = f;
  }
}

TEST_CASE("day offset is a deterministic per device and session draw") {
  const DeviceProfile p = drifting_profile();
  CHECK(day_offset(p, 4) == day_offset(p, 4));
  CHECK(day_offset(p, 4) != day_offset(p, 5));
  DeviceProfile q = p;
  q.device_id = 4;
  CHECK(day_offset(q, 4) != day_offset(p, 4));
  // Statistics of the draw over many sessions.
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int s = 1; s <= n; ++s) {
    const double d = day_offset(p, s);
    REQUIRE(std::abs(d) <= 5.0 * p.cfo_day_sigma);
    sum += d;
    sq += d * d;
  }
  CHECK(std::abs(sum / n) < 4.0 * p.cfo_day_sigma / std::sqrt(n));
  CHECK(std::sqrt(sq / n) == doctest::Approx(p.cfo_day_sigma).epsilon(0.03));
}

TEST_CASE("every emitted CFO stays inside the soft envelope") {
  DeviceProfile p = drifting_profile();
  p.cfo_warmup_amp = 0.0;
  p.cfo_base = 8680.0;
  p.cfo_day_sigma = 100.0;
  p.cfo_jitter_sigma = 200.0;
  const double bound = 10e-6 * 868.1e6 + 5.0 * (p.cfo_day_sigma + p.cfo_jitter_sigma);
  for (int k = 0; k < 20000; ++k)
    REQUIRE(std::abs(cfo_at(p, {1 + k % 9, 1e6, 30.0, static_cast<std::uint64_t>(k)})) <= bound);
}

TEST_CASE("identity impairments leave the chirp untouched") {
  const ComplexSignal clean = preamble_sequence(LoRaParams{});
  const ComplexSignal out = apply_impairments(clean, DeviceProfile::identity(), 0.0);
  for (std::size_t n = 0; n < clean.size(); ++n) REQUIRE(out[n] == clean[n]);
}

TEST_CASE("frequency offset adds a constant to the instantaneous frequency") {
  const LoRaParams params;
  const ComplexSignal clean = basic_chirp(params);
  const ComplexSignal out = apply_impairments(clean, DeviceProfile::identity(), 1000.0);
  const auto f_in = instantaneous_frequency(clean);
  const auto f_out = instantaneous_frequency(out);
  for (std::size_t n = 0; n < f_in.size(); ++n) REQUIRE(f_out[n] - f_in[n] == doctest::Approx(1000.0).epsilon(1e-6));
}

TEST_CASE("third-order amplifier compresses a unit-modulus input") {
  DeviceProfile p = DeviceProfile::identity();
  p.pa_a3 = -0.05;
  const ComplexSignal out = apply_impairments(basic_chirp(LoRaParams{}), p, 0.0);
  for (std::size_t n = 0; n < out.size(); ++n) REQUIRE(std::abs(out[n]) == doctest::Approx(0.95).epsilon(1e-12));
}

TEST_CASE("IQ imbalance follows the component model") {
  DeviceProfile p = DeviceProfile::identity();
  p.iq_gain_mismatch = 1.1;
  p.iq_phase_error = 0.2;
  const ComplexSignal x({cplx{0.3, -0.4}, cplx{-1.0, 0.5}}, 1e-6);
  const ComplexSignal y = apply_impairments(x, p, 0.0);
  for (std::size_t n = 0; n < 2; ++n) {
    CHECK(y[n].real() == doctest::Approx(x[n].real() * 1.1));
    CHECK(y[n].imag() == doctest::Approx(x[n].imag() * std::cos(0.2) + x[n].real() * std::sin(0.2)));
  }
}

TEST_CASE("noise-free identity packet equals the ideal preamble") {
  const LoRaParams params;
  const PacketRecord r = emit_packet(params, DeviceProfile::identity(2), {1, 0.0, INFINITY, 5});
  const ComplexSignal ideal = preamble_sequence(params);
  REQUIRE(r.signal.size() == ideal.size());
  for (std::size_t n = 0; n < ideal.size(); ++n) REQUIRE(r.signal[n] == ideal[n]);
  CHECK(r.true_device == 2);
  CHECK(r.true_cfo == 0.0);
}

TEST_CASE("emit_packet is a pure function of its inputs") {
  const LoRaParams params;
  const DeviceProfile p = drifting_profile();
  const EmissionContext ctx{3, 42.0, 20.0, 777};
  const PacketRecord a = emit_packet(params, p, ctx, 100);
  const PacketRecord b = emit_packet(params, p, ctx, 100);
  REQUIRE(a.signal.size() == params.n_preambles * symbol_length(params) + 100);
  for (std::size_t n = 0; n < a.signal.size(); ++n) REQUIRE(a.signal[n] == b.signal[n]);
  CHECK(a.true_cfo == b.true_cfo);
  const PacketRecord c = emit_packet(params, p, {3, 42.0, 20.0, 778}, 100);
  CHECK(c.signal[0] != a.signal[0]);
}

TEST_CASE("measured SNR matches the requested value") {
  LoRaParams params;
  params.ts = 8e-6;  // 128-sample symbols keep the Monte-Carlo run short
  DeviceProfile p = DeviceProfile::identity();
  p.pa_a1 = 0.8;
  const ComplexSignal ideal = apply_impairments(preamble_sequence(params), p, 0.0);
  double signal_power = 0.0;
  for (const cplx& s : ideal.samples()) signal_power += std::norm(s);
  signal_power /= static_cast<double>(ideal.size());
  for (double snr : {0.0, 12.5, 30.0}) {
    double noise_power = 0.0;
    std::size_t count = 0;
    for (int k = 0; k < 10000; ++k) {
      const PacketRecord r = emit_packet(params, p, {1, 0.0, snr, static_cast<std::uint64_t>(k)});
      for (std::size_t n = 0; n < ideal.size(); ++n) noise_power += std::norm(r.signal[n] - ideal[n]);
      count += ideal.size();
    }
    const double measured = 10.0 * std::log10(signal_power / (noise_power / static_cast<double>(count)));
    CHECK(std::abs(measured - snr) < 0.2);
  }
}

TEST_CASE("profile sampler honors the ranges") {
  const ProfileRanges r;
  const auto profiles = sample_profiles(500, 868.1e6, 9, r);
  REQUIRE(profiles.size() == 500);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const DeviceProfile& p = profiles[i];
    CHECK(p.device_id == static_cast<int>(i) + 1);
    CHECK(std::abs(p.cfo_base) <= 8681.0);
    CHECK(p.cfo_warmup_amp >= r.warmup_amp_min);
    CHECK(p.cfo_warmup_amp <= r.warmup_amp_max);
    CHECK(p.cfo_warmup_tau >= r.warmup_tau_min);
    CHECK(p.cfo_warmup_tau <= r.warmup_tau_max);
    CHECK(std::abs(p.iq_gain_mismatch - 1.0) <= r.iq_gain_dev);
    CHECK(std::abs(p.iq_phase_error) <= r.iq_phase_max);
    CHECK(p.pa_a3 >= r.pa_a3_min);
    CHECK(p.pa_a3 <= r.pa_a3_max);
    CHECK_NOTHROW(p.validate(868.1e6));
  }
  CHECK(sample_profiles(5, 868.1e6, 9, r) == sample_profiles(5, 868.1e6, 9, r));
  CHECK_FALSE(sample_profiles(5, 868.1e6, 9, r) == sample_profiles(5, 868.1e6, 10, r));
}

TEST_CASE("profile validation") {
  DeviceProfile p = DeviceProfile::identity();
  p.cfo_base = 9000.0;
  CHECK_THROWS_AS(p.validate(868.1e6), ConfigError);
  p = DeviceProfile::identity();
  p.cfo_warmup_tau = 0.0;
  CHECK_THROWS_AS(p.validate(868.1e6), ConfigError);
  p = DeviceProfile::identity();
  p.iq_gain_mismatch = 2.0;
  CHECK_THROWS_AS(p.validate(868.1e6), ConfigError);
  p = DeviceProfile::identity();
  p.pa_a1 = 0.0;
  CHECK_THROWS_AS(p.validate(868.1e6), ConfigError);
  p = DeviceProfile::identity();
  p.cfo_day_sigma = -1.0;
  CHECK_THROWS_AS(p.validate(868.1e6), ConfigError);
}

TEST_CASE("portable normal draws have unit variance") {
  std::mt19937_64 rng(5);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n / 2; ++i) {
    const auto [a, b] = normal_pair(rng);
    sum += a + b;
    sq += a * a + b * b;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("generated dataset has the planned layout") {
  test::TempDir dir;
  const LoRaParams params;
  const auto profiles = sample_profiles(10, params.fc, 1);
  CaptureSchedule schedule;
  schedule.sessions = {{1, 100}};
  generate_dataset(params, profiles, schedule, 7, dir.path / "a.bin");
  DatasetReader reader(dir.path / "a.bin");
  REQUIRE(reader.size() == 1000);
  std::vector<int> counts(11, 0);
  for (std::size_t i = 0; i < reader.size(); ++i) {
    const RecordMeta m = reader.meta(i);
    REQUIRE(m.true_device >= 1);
    REQUIRE(m.true_device <= 10);
    ++counts[static_cast<std::size_t>(m.true_device)];
    REQUIRE(m.elapsed == static_cast<double>(i % 100) * schedule.interval);
  }
  for (int id = 1; id <= 10; ++id) CHECK(counts[static_cast<std::size_t>(id)] == 100);
}

TEST_CASE("multi-session capture spans the expected elapsed range") {
  test::TempDir dir;
  LoRaParams params;
  params.ts = 8e-6;
  const auto profiles = sample_profiles(2, params.fc, 1);
  CaptureSchedule schedule;
  schedule.sessions = {{1, 3000}, {4, 5}};
  generate_dataset(params, profiles, schedule, 3, dir.path / "a.bin");
  DatasetReader reader(dir.path / "a.bin");
  REQUIRE(reader.size() == 2 * 3005);
  const RecordGroup& g = reader.manifest().group(1, 2);
  CHECK(reader.meta(g.first_record).elapsed == 0.0);
  CHECK(reader.meta(g.first_record + g.count - 1).elapsed == 2999.0);
  CHECK(reader.meta(reader.manifest().group(4, 1).first_record).session_index == 4);
}

TEST_CASE("same seed gives a byte-identical dataset") {
  test::TempDir dir;
  LoRaParams params;
  params.ts = 4e-6;
  const auto profiles = sample_profiles(3, params.fc, 2);
  CaptureSchedule schedule;
  schedule.sessions = {{1, 70}, {2, 10}};
  schedule.leading_padding = 33;
  generate_dataset(params, profiles, schedule, 99, dir.path / "a.bin");
  generate_dataset(params, profiles, schedule, 99, dir.path / "b.bin");
  generate_dataset(params, profiles, schedule, 100, dir.path / "c.bin");
  CHECK(test::read_bytes(dir.path / "a.bin") == test::read_bytes(dir.path / "b.bin"));
  CHECK(test::read_bytes(dir.path / "a.bin") != test::read_bytes(dir.path / "c.bin"));
}

TEST_CASE("capture plan validation") {
  const LoRaParams params;
  CaptureSchedule schedule;
  schedule.sessions = {{1, 10}};
  CHECK_THROWS_AS(for_each_packet(params, sample_profiles(1, params.fc, 1), schedule, 1, [](const PacketRecord&) {}),
                  ConfigError);
  schedule.sessions = {{1, 0}};
  CHECK_THROWS_AS(schedule.validate(), ConfigError);
  schedule.sessions = {{1, 5}};
  schedule.interval = 0.0;
  CHECK_THROWS_AS(schedule.validate(), ConfigError);
}
