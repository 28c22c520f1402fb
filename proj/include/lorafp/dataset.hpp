#pragma once

// Dataset container, format version 1. All integers and floats little-endian.
//
//   offset  size  field
//   0       8     magic "LFPDSET\0"
//   8       4     u32 format version (1)
//   12      4     u32 reserved (0)
//   16      8     u64 manifest byte length m
//   24      m     manifest, UTF-8 JSON (see DatasetManifest)
//   24+m    ...   records, each record_bytes() long:
//                   i32 true_device, i32 session_index,
//                   f64 true_cfo [Hz], f64 elapsed [s], f64 snr_db (+inf allowed), u64 rng_seed,
//                   samples_per_record x (f32 re, f32 im)
//
// Records are ordered by session (schedule order), then device (profile order), then packet.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lorafp/devsim.hpp"

namespace lorafp {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

struct RecordGroup {
  int session_index = 0;
  int device_id = 0;
  std::size_t first_record = 0;
  std::size_t count = 0;
};

struct DatasetManifest {
  LoRaParams params;
  std::vector<DeviceProfile> profiles;
  CaptureSchedule schedule;
  std::uint64_t master_seed = 0;
  std::size_t samples_per_record = 0;
  std::size_t record_count = 0;
  std::vector<RecordGroup> index;

  static DatasetManifest make(const LoRaParams& params, const std::vector<DeviceProfile>& profiles,
                              const CaptureSchedule& schedule, std::uint64_t master_seed);

  /// FNV-1a 64 over the canonical profile JSON, as 16 hex digits.
  std::string profiles_digest() const;
  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);

  std::vector<int> device_ids() const;
  /// Record indices of one device in one session, in emission order.
  const RecordGroup& group(int session_index, int device_id) const;
};

struct RecordMeta {
  int true_device = 0;
  int session_index = 0;
  double true_cfo = 0.0;
  double elapsed = 0.0;
  double snr_db = 0.0;
  std::uint64_t rng_seed = 0;
};

inline constexpr std::size_t kRecordHeaderBytes = 40;

class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, DatasetManifest manifest);
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void append(const PacketRecord& record);
  /// Flushes and checks the record count against the manifest.
  void finish();

 private:
  std::filesystem::path path_;
  DatasetManifest manifest_;
  std::ofstream out_;
  std::size_t written_ = 0;
  std::vector<char> buffer_;
};

class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return manifest_.record_count; }

  RecordMeta meta(std::size_t index);
  PacketRecord record(std::size_t index);

 private:
  void seek(std::size_t index);
  RecordMeta read_meta();

  std::filesystem::path path_;
  std::ifstream in_;
  DatasetManifest manifest_;
  std::uint64_t data_offset_ = 0;
};

std::size_t record_bytes(std::size_t samples_per_record);

}  // namespace lorafp
