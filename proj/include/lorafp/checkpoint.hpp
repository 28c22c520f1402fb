#pragma once

// Model checkpoint, format version 1. All integers and floats little-endian.
//
//   offset  size  field
//   0       8     magic "LFPCKPT\0"
//   8       4     u32 format version (1)
//   12      4     u32 reserved (0)
//   16      8     u64 header byte length h
//   24      h     header, UTF-8 JSON: architecture, representation, compensation flag, spectrogram
//                 settings, LoRa parameters, class device ids, CFO database, source dataset identity,
//                 training selection and a tensor directory [{name, count}]
//   24+h    ...   tensors in directory order, each count x f32: trainable parameters (layer order,
//                 weight then bias, gamma then beta), then batchnorm running mean and variance

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lorafp/classifier.hpp"
#include "lorafp/config.hpp"
#include "lorafp/phy.hpp"
#include "lorafp/repr.hpp"

namespace lorafp {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Which simulated capture a model was trained on.
struct DatasetIdentity {
  std::string profiles_digest;
  std::uint64_t master_seed = 0;

  bool operator==(const DatasetIdentity&) const = default;
};

struct Checkpoint {
  Classifier model;
  CfoDatabase database;
  Representation representation = Representation::spectrogram;
  bool compensated = true;
  SpectrogramConfig spectrogram;
  LoRaParams lora;
  DatasetIdentity dataset;
  Selection train_selection;
};

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on a bad magic, version, header or tensor directory.
Checkpoint parse_checkpoint(std::span<const char> bytes, const std::string& what = "checkpoint");

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Whole file as bytes; throws IoError.
std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace lorafp
