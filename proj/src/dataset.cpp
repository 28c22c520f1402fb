#include "lorafp/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "binary_io.hpp"
#include "json_io.hpp"

namespace lorafp {

namespace {

constexpr std::array<char, 8> kMagic = {'L', 'F', 'P', 'D', 'S', 'E', 'T', '\0'};
constexpr std::size_t kPreludeBytes = 24;

using detail::json;

}  // namespace

std::size_t record_bytes(std::size_t samples_per_record) {
  return kRecordHeaderBytes + samples_per_record * 2 * sizeof(float);
}

DatasetManifest DatasetManifest::make(const LoRaParams& params, const std::vector<DeviceProfile>& profiles,
                                      const CaptureSchedule& schedule, std::uint64_t master_seed) {
  params.validate();
  schedule.validate();
  DatasetManifest m;
  m.params = params;
  m.profiles = profiles;
  m.schedule = schedule;
  m.master_seed = master_seed;
  m.samples_per_record =
      symbol_length(params) * static_cast<std::size_t>(params.n_preambles) + schedule.leading_padding;
  std::size_t next = 0;
  for (const SessionPlan& s : schedule.sessions) {
    for (const DeviceProfile& p : profiles) {
      m.index.push_back({s.session_index, p.device_id, next, static_cast<std::size_t>(s.packets)});
      next += static_cast<std::size_t>(s.packets);
    }
  }
  m.record_count = next;
  return m;
}

std::string DatasetManifest::profiles_digest() const {
  json arr = json::array();
  for (const DeviceProfile& p : profiles) arr.push_back(detail::to_json(p));
  const std::string canonical = arr.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string DatasetManifest::to_json() const {
  json profiles_json = json::array();
  for (const DeviceProfile& p : profiles) profiles_json.push_back(detail::to_json(p));
  json index_json = json::array();
  for (const RecordGroup& g : index)
    index_json.push_back({{"session_index", g.session_index},
                          {"device_id", g.device_id},
                          {"first_record", g.first_record},
                          {"count", g.count}});
  json j{{"format", "lorafp-dataset"},           {"version", kDatasetFormatVersion},
         {"lora", detail::to_json(params)},      {"profiles", profiles_json},
         {"profiles_digest", profiles_digest()}, {"schedule", detail::to_json(schedule)},
         {"master_seed", master_seed},           {"samples_per_record", samples_per_record},
         {"record_count", record_count},         {"index", index_json}};
  return j.dump();
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "lorafp-dataset") throw FormatError("manifest is not a lorafp dataset");
    if (j.at("version").get<std::uint32_t>() != kDatasetFormatVersion)
      throw FormatError("unsupported manifest version " + j.at("version").dump());
    DatasetManifest m;
    m.params = detail::lora_from_json(j.at("lora"));
    for (const json& p : j.at("profiles")) m.profiles.push_back(detail::profile_from_json(p));
    m.schedule = detail::schedule_from_json(j.at("schedule"));
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.samples_per_record = j.at("samples_per_record").get<std::size_t>();
    m.record_count = j.at("record_count").get<std::size_t>();
    for (const json& g : j.at("index"))
      m.index.push_back({g.at("session_index").get<int>(), g.at("device_id").get<int>(),
                         g.at("first_record").get<std::size_t>(), g.at("count").get<std::size_t>()});
    if (j.at("profiles_digest").get<std::string>() != m.profiles_digest())
      throw FormatError("manifest profile digest mismatch");
    std::size_t total = 0;
    for (const RecordGroup& g : m.index) total += g.count;
    if (total != m.record_count) throw FormatError("manifest index does not cover record_count");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset manifest: ") + e.what());
  }
}

std::vector<int> DatasetManifest::device_ids() const {
  std::vector<int> ids;
  for (const DeviceProfile& p : profiles) ids.push_back(p.device_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

const RecordGroup& DatasetManifest::group(int session_index, int device_id) const {
  for (const RecordGroup& g : index)
    if (g.session_index == session_index && g.device_id == device_id) return g;
  throw DatasetError("dataset has no records for device " + std::to_string(device_id) + " in session " +
                     std::to_string(session_index));
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path, DatasetManifest manifest)
    : path_(path), manifest_(std::move(manifest)) {
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open dataset for writing: " + path_.string());
  const std::string text = manifest_.to_json();
  std::vector<char> head;
  detail::put_bytes(head, kMagic);
  detail::put<std::uint32_t>(head, kDatasetFormatVersion);
  detail::put<std::uint32_t>(head, 0);
  detail::put<std::uint64_t>(head, text.size());
  head.insert(head.end(), text.begin(), text.end());
  out_.write(head.data(), static_cast<std::streamsize>(head.size()));
  if (!out_) throw IoError("write failed: " + path_.string());
}

void DatasetWriter::append(const PacketRecord& r) {
  if (written_ >= manifest_.record_count) throw DatasetError("more records than the manifest declares");
  if (r.signal.size() != manifest_.samples_per_record)
    throw ShapeError("record has " + std::to_string(r.signal.size()) + " samples, manifest expects " +
                     std::to_string(manifest_.samples_per_record));
  buffer_.clear();
  detail::put<std::int32_t>(buffer_, r.true_device);
  detail::put<std::int32_t>(buffer_, r.context.session_index);
  detail::put<double>(buffer_, r.true_cfo);
  detail::put<double>(buffer_, r.context.elapsed);
  detail::put<double>(buffer_, r.context.snr_db);
  detail::put<std::uint64_t>(buffer_, r.context.rng_seed);
  for (const cplx& s : r.signal.samples()) {
    detail::put<float>(buffer_, static_cast<float>(s.real()));
    detail::put<float>(buffer_, static_cast<float>(s.imag()));
  }
  out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  if (!out_) throw IoError("write failed: " + path_.string());
  ++written_;
}

void DatasetWriter::finish() {
  out_.flush();
  if (!out_) throw IoError("flush failed: " + path_.string());
  out_.close();
  if (written_ != manifest_.record_count)
    throw DatasetError("dataset " + path_.string() + " has " + std::to_string(written_) +
                       " records, manifest declares " + std::to_string(manifest_.record_count));
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : path_(path) {
  in_.open(path_, std::ios::binary);
  if (!in_) throw IoError("cannot open dataset: " + path_.string());
  std::array<char, kPreludeBytes> prelude{};
  in_.read(prelude.data(), prelude.size());
  if (!in_) throw FormatError(path_.string() + ": too short for a dataset header");
  detail::ByteReader rd(prelude, path_.string());
  if (rd.get_string(8) != std::string(kMagic.data(), kMagic.size())) throw FormatError(path_.string() + ": bad magic");
  const auto version = rd.get<std::uint32_t>();
  if (version != kDatasetFormatVersion)
    throw FormatError(path_.string() + ": unsupported dataset format version " + std::to_string(version));
  rd.get<std::uint32_t>();
  const auto manifest_bytes = rd.get<std::uint64_t>();
  std::string text(manifest_bytes, '\0');
  in_.read(text.data(), static_cast<std::streamsize>(manifest_bytes));
  if (!in_) throw FormatError(path_.string() + ": truncated manifest");
  manifest_ = DatasetManifest::from_json(text);
  data_offset_ = kPreludeBytes + manifest_bytes;

  const auto expected = data_offset_ + manifest_.record_count * record_bytes(manifest_.samples_per_record);
  const auto actual = std::filesystem::file_size(path_);
  if (actual != expected)
    throw FormatError(path_.string() + ": file holds " + std::to_string(actual) + " bytes, manifest implies " +
                      std::to_string(expected));
  const std::size_t want = symbol_length(manifest_.params) * static_cast<std::size_t>(manifest_.params.n_preambles) +
                           manifest_.schedule.leading_padding;
  if (want != manifest_.samples_per_record) throw FormatError(path_.string() + ": samples_per_record inconsistent");
}

void DatasetReader::seek(std::size_t index) {
  if (index >= manifest_.record_count)
    throw DatasetError("record " + std::to_string(index) + " out of range in " + path_.string());
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(data_offset_ + index * record_bytes(manifest_.samples_per_record)));
}

RecordMeta DatasetReader::read_meta() {
  std::array<char, kRecordHeaderBytes> head{};
  in_.read(head.data(), head.size());
  if (!in_) throw IoError("read failed: " + path_.string());
  detail::ByteReader rd(head, path_.string());
  RecordMeta m;
  m.true_device = rd.get<std::int32_t>();
  m.session_index = rd.get<std::int32_t>();
  m.true_cfo = rd.get<double>();
  m.elapsed = rd.get<double>();
  m.snr_db = rd.get<double>();
  m.rng_seed = rd.get<std::uint64_t>();
  return m;
}

RecordMeta DatasetReader::meta(std::size_t index) {
  seek(index);
  return read_meta();
}

PacketRecord DatasetReader::record(std::size_t index) {
  seek(index);
  const RecordMeta m = read_meta();
  const std::size_t n = manifest_.samples_per_record;
  std::vector<float> raw(2 * n);
  in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in_) throw IoError("read failed: " + path_.string());
  std::vector<cplx> samples(n);
  for (std::size_t i = 0; i < n; ++i) samples[i] = cplx{raw[2 * i], raw[2 * i + 1]};
  EmissionContext ctx{m.session_index, m.elapsed, m.snr_db, m.rng_seed};
  return PacketRecord{ComplexSignal(std::move(samples), manifest_.params.ts), m.true_device, m.true_cfo, ctx};
}

}  // namespace lorafp
