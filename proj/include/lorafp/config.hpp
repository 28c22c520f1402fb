#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lorafp/classifier.hpp"
#include "lorafp/devsim.hpp"
#include "lorafp/phy.hpp"
#include "lorafp/repr.hpp"

namespace lorafp {

/// Packets [first, first + count) of every device in each listed session.
struct Selection {
  std::vector<int> sessions;  ///< empty selects every session
  std::size_t first = 0;
  std::size_t count = 0;  ///< 0 runs to the end of each device's session

  bool operator==(const Selection&) const = default;
  std::string describe() const;
};

/// Both selections touch a common packet of some device-session.
bool overlaps(const Selection& a, const Selection& b, const std::vector<SessionPlan>& sessions);

struct ModelConfig {
  std::array<int, 3> filters = {8, 16, 32};
  int kernel = 3;                                 ///< spectrogram conv kernel (square)
  std::array<int, 3> kernel_w = {128, 128, 128};  ///< IQ/FFT conv widths
  int pool = 4;                                   ///< IQ/FFT pooling width

  bool operator==(const ModelConfig&) const = default;
};

/// Everything one experiment needs: simulation, receiver, model, training and evaluation settings.
struct ExperimentConfig {
  LoRaParams lora;
  std::vector<DeviceProfile> profiles;
  CaptureSchedule schedule;
  std::uint64_t seed = 1;  ///< dataset master seed
  SpectrogramConfig spectrogram;
  ModelConfig model;
  TrainConfig train;
  double lambda = 200.0;
  Selection train_selection{{1}, 0, 1000};
  Selection test_selection{{1}, 1000, 0};

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses the YAML experiment document. Unknown keys are rejected.
///
///   lora:      {sf, bw, fc, ts, n_preambles}
///   devices:   {count, seed, ranges: {...}, overrides: [{device_id, <profile fields>}]}
///              or {profiles: [{device_id, <profile fields>}]}
///   schedule:  {interval, snr_db, leading_padding, sessions: [{session, packets}]}
///   seed:      master seed of the dataset
///   spectrogram: {window_len, hop}
///   model:     {filters, kernel, kernel_w, pool}
///   train:     {epochs, batch_size, initial_lr, lr_drop_period, lr_drop_factor, beta1, beta2, epsilon,
///               patience, validation_fraction, seed, lambda, select: {sessions, first, count}}
///   eval:      {select: {sessions, first, count}}
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Architecture for a representation at the given input shape.
nn::CnnSpec make_spec(Representation kind, nn::Shape input, int num_classes, const ModelConfig& model);

}  // namespace lorafp
