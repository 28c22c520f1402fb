#include <doctest.h>

#include <cmath>
#include <string>

#include "lorafp/config.hpp"
#include "lorafp/error.hpp"
#include "test_util.hpp"

using namespace lorafp;

namespace {

const std::string kMinimal = R"(
devices: {count: 3, seed: 4}
schedule:
  sessions:
    - {session: 1, packets: 10}
)";

std::string error_of(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal document takes the documented defaults") {
  const ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.lora.sf == 7);
  CHECK(c.lora.bw == 125000.0);
  CHECK(c.lora.ts == 1e-6);
  CHECK(c.lora.n_preambles == 8);
  CHECK(c.profiles.size() == 3);
  CHECK(c.profiles == sample_profiles(3, c.lora.fc, 4));
  CHECK(c.schedule.snr_db == 30.0);
  CHECK(c.spectrogram.window_len == 256);
  CHECK(c.spectrogram.hop == 128);
  CHECK(c.train.initial_lr == 3e-4);
  CHECK(c.lambda == 200.0);
  CHECK(c.model == ModelConfig{});
}

TEST_CASE("the shipped smoke config parses") {
  const ExperimentConfig c = load_config(LORAFP_SOURCE_DIR "/configs/smoke.yaml");
  CHECK(c.profiles.size() == 4);
  CHECK(c.seed == 11);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.seed == 5);
  CHECK(c.train_selection == Selection{{1}, 0, 80});
  CHECK(c.test_selection == Selection{{1}, 80, 40});
  CHECK_THROWS_AS(load_config("/nonexistent/experiment.yaml"), IoError);
}

TEST_CASE("every section is read") {
  const ExperimentConfig c = parse_config(R"(
lora: {sf: 8, bw: 250000, fc: 915e6, ts: 2.0e-6, n_preambles: 6}
devices:
  count: 4
  seed: 9
  ranges: {iq_gain_dev: 0.02, day_sigma: 50}
  overrides:
    - {device_id: 2, cfo_base: 1234.5, pa_a3: -0.07}
schedule:
  interval: 2.5
  snr_db: inf
  leading_padding: 64
  sessions:
    - {session: 1, packets: 20}
    - {session: 4, packets: 30}
seed: 77
spectrogram: {window_len: 128, hop: 64}
model: {filters: [4, 8, 16], kernel: 5, kernel_w: [64, 32, 16], pool: 2}
train:
  epochs: 7
  batch_size: 16
  initial_lr: 0.001
  lr_drop_period: 3
  lr_drop_factor: 0.5
  beta1: 0.8
  beta2: 0.99
  epsilon: 1.0e-7
  patience: 2
  validation_fraction: 0.2
  seed: 3
  lambda: inf
  select: {sessions: [1], first: 5, count: 10}
eval:
  select: {sessions: [4]}
)");
  CHECK(c.lora.sf == 8);
  CHECK(c.lora.bw == 250000.0);
  CHECK(c.lora.fc == 915e6);
  CHECK(c.lora.ts == 2e-6);
  CHECK(c.lora.n_preambles == 6);
  ProfileRanges r;
  r.iq_gain_dev = 0.02;
  r.day_sigma = 50;
  auto expected = sample_profiles(4, 915e6, 9, r);
  expected[1].cfo_base = 1234.5;
  expected[1].pa_a3 = -0.07;
  CHECK(c.profiles == expected);
  CHECK(c.schedule.interval == 2.5);
  CHECK(std::isinf(c.schedule.snr_db));
  CHECK(c.schedule.leading_padding == 64);
  REQUIRE(c.schedule.sessions.size() == 2);
  CHECK(c.schedule.sessions[1].session_index == 4);
  CHECK(c.schedule.sessions[1].packets == 30);
  CHECK(c.seed == 77);
  CHECK(c.spectrogram.window_len == 128);
  CHECK(c.spectrogram.hop == 64);
  CHECK(c.model.filters == std::array<int, 3>{4, 8, 16});
  CHECK(c.model.kernel == 5);
  CHECK(c.model.kernel_w == std::array<int, 3>{64, 32, 16});
  CHECK(c.model.pool == 2);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.initial_lr == 0.001);
  CHECK(c.train.lr_drop_period == 3);
  CHECK(c.train.lr_drop_factor == 0.5);
  CHECK(c.train.beta1 == 0.8);
  CHECK(c.train.beta2 == 0.99);
  CHECK(c.train.epsilon == 1e-7);
  CHECK(c.train.patience == 2);
  CHECK(c.train.validation_fraction == 0.2);
  CHECK(c.train.seed == 3);
  CHECK(std::isinf(c.lambda));
  CHECK(c.train_selection == Selection{{1}, 5, 10});
  CHECK(c.test_selection == Selection{{4}, 0, 0});
}

TEST_CASE("explicit profiles") {
  const ExperimentConfig c = parse_config(R"(
devices:
  profiles:
    - {device_id: 5, cfo_base: 100, iq_gain_mismatch: 1.05}
    - {device_id: 9, cfo_base: -100, iq_phase_error: 0.02}
schedule: {sessions: [{session: 2, packets: 3}]}
)");
  REQUIRE(c.profiles.size() == 2);
  CHECK(c.profiles[0].device_id == 5);
  CHECK(c.profiles[0].iq_gain_mismatch == 1.05);
  CHECK(c.profiles[0].iq_phase_error == 0.0);
  CHECK(c.profiles[1].iq_phase_error == 0.02);
}

TEST_CASE("configuration errors name the field") {
  CHECK(error_of(kMinimal + "colour: red\n").find("colour") != std::string::npos);
  CHECK(error_of(kMinimal + "train: {epoks: 3}\n").find("epoks") != std::string::npos);
  CHECK(error_of(kMinimal + "lora: {sf: 13}\n").find("sf") != std::string::npos);
  CHECK(error_of(kMinimal + "train: {batch_size: 0}\n").find("batch_size") != std::string::npos);
  CHECK(error_of(kMinimal + "train: {lambda: -5}\n").find("lambda") != std::string::npos);
  CHECK(error_of(kMinimal + "lora: {bw: fast}\n").find("bw") != std::string::npos);
  CHECK_FALSE(error_of("devices: {count: 1}\nschedule: {sessions: [{session: 1, packets: 1}]}\n").empty());
  CHECK_FALSE(
      error_of("devices: {count: 3, profiles: []}\nschedule: {sessions: [{session: 1, packets: 1}]}\n").empty());
  CHECK_FALSE(error_of("devices: {count: 3}\n").empty());
  CHECK_FALSE(error_of("devices: [1, 2]\n").empty());
  CHECK_FALSE(error_of("{unclosed").empty());
  CHECK_FALSE(error_of(R"(
devices:
  profiles:
    - {device_id: 1}
    - {device_id: 1}
schedule: {sessions: [{session: 1, packets: 1}]}
)")
                  .empty());
}

TEST_CASE("selections and overlap") {
  const std::vector<SessionPlan> plan{{1, 100}, {4, 50}};
  CHECK(overlaps({{1}, 0, 50}, {{1}, 49, 10}, plan));
  CHECK_FALSE(overlaps({{1}, 0, 50}, {{1}, 50, 10}, plan));
  CHECK_FALSE(overlaps({{1}, 0, 0}, {{4}, 0, 0}, plan));
  CHECK(overlaps({{}, 0, 0}, {{4}, 10, 1}, plan));
  CHECK(overlaps({{1}, 90, 0}, {{1}, 95, 1}, plan));
  CHECK_FALSE(overlaps({{1}, 100, 0}, {{1}, 0, 0}, plan));
  CHECK_FALSE(overlaps({{9}, 0, 0}, {{9}, 0, 0}, plan));
  CHECK(Selection{{1, 4}, 5, 10}.describe() == "sessions=1;4 packets=5..14");
  CHECK(Selection{{}, 0, 0}.describe() == "sessions=all packets=0..end");
}

TEST_CASE("architecture per representation") {
  const ModelConfig m;
  CHECK(make_spec(Representation::spectrogram, {1, 256, 63}, 10, m).shapes().back() == nn::Shape{10, 1, 1});
  const nn::CnnSpec iq = make_spec(Representation::iq, {1, 2, 8192}, 10, m);
  CHECK(iq.name == "iq");
  CHECK(iq.layers[0].kernel_w == 128);
  CHECK(make_spec(Representation::fft, {1, 2, 8192}, 10, m).name == "fft");
}
