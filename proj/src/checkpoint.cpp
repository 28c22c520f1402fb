#include "lorafp/checkpoint.hpp"

#include <array>
#include <fstream>

#include "binary_io.hpp"
#include "json_io.hpp"
#include "lorafp/error.hpp"

namespace lorafp {

namespace {

using detail::json;

constexpr std::array<char, 8> kMagic = {'L', 'F', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kPreludeBytes = 24;

json spec_to_json(const nn::CnnSpec& s) {
  json layers = json::array();
  for (const nn::LayerSpec& l : s.layers)
    layers.push_back({{"kind", nn::to_string(l.kind)},
                      {"filters", l.filters},
                      {"kernel", {l.kernel_h, l.kernel_w}},
                      {"stride", {l.stride_h, l.stride_w}},
                      {"pad", {l.pad_top, l.pad_bottom, l.pad_left, l.pad_right}},
                      {"units", l.units}});
  return {{"name", s.name},
          {"input", {s.input.c, s.input.h, s.input.w}},
          {"num_classes", s.num_classes},
          {"layers", layers}};
}

nn::CnnSpec spec_from_json(const json& j) {
  nn::CnnSpec s;
  s.name = j.at("name").get<std::string>();
  const auto in = j.at("input").get<std::array<int, 3>>();
  s.input = {in[0], in[1], in[2]};
  s.num_classes = j.at("num_classes").get<int>();
  for (const json& l : j.at("layers")) {
    nn::LayerSpec ls;
    ls.kind = nn::parse_layer_kind(l.at("kind").get<std::string>());
    ls.filters = l.at("filters").get<int>();
    const auto k = l.at("kernel").get<std::array<int, 2>>();
    const auto st = l.at("stride").get<std::array<int, 2>>();
    const auto p = l.at("pad").get<std::array<int, 4>>();
    ls.kernel_h = k[0];
    ls.kernel_w = k[1];
    ls.stride_h = st[0];
    ls.stride_w = st[1];
    ls.pad_top = p[0];
    ls.pad_bottom = p[1];
    ls.pad_left = p[2];
    ls.pad_right = p[3];
    ls.units = l.at("units").get<int>();
    s.layers.push_back(ls);
  }
  return s;
}

json selection_to_json(const Selection& s) {
  return {{"sessions", s.sessions}, {"first", s.first}, {"count", s.count}};
}

Selection selection_from_json(const json& j) {
  Selection s;
  s.sessions = j.at("sessions").get<std::vector<int>>();
  s.first = j.at("first").get<std::size_t>();
  s.count = j.at("count").get<std::size_t>();
  return s;
}

}  // namespace

std::vector<char> serialize_checkpoint(const Checkpoint& c) {
  const auto params = c.model.net.parameters();
  const auto state = c.model.net.state();
  json tensors = json::array();
  for (const auto& p : params) tensors.push_back({{"name", p.name}, {"count", p.value.size()}});
  for (const auto& s : state) tensors.push_back({{"name", s.name}, {"count", s.value.size()}});
  json reference = json::array();
  for (const auto& [id, hz] : c.database.reference) reference.push_back({id, hz});
  const json header = {
      {"architecture", spec_to_json(c.model.net.spec())},
      {"representation", to_string(c.representation)},
      {"compensated", c.compensated},
      {"spectrogram",
       {{"window_len", c.spectrogram.window_len},
        {"hop", c.spectrogram.hop},
        {"epsilon", c.spectrogram.epsilon},
        {"standardize", c.spectrogram.standardize}}},
      {"lora", detail::to_json(c.lora)},
      {"device_ids", c.model.device_ids},
      {"cfo_database", {{"lambda", detail::number_or_inf(c.database.lambda)}, {"reference", reference}}},
      {"dataset", {{"profiles_digest", c.dataset.profiles_digest}, {"master_seed", c.dataset.master_seed}}},
      {"train_selection", selection_to_json(c.train_selection)},
      {"tensors", tensors},
  };
  const std::string text = header.dump();
  std::vector<char> out;
  detail::put_bytes(out, kMagic);
  detail::put<std::uint32_t>(out, kCheckpointFormatVersion);
  detail::put<std::uint32_t>(out, 0);
  detail::put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& p : params)
    for (float v : p.value) detail::put<float>(out, v);
  for (const auto& s : state)
    for (float v : s.value) detail::put<float>(out, v);
  return out;
}

Checkpoint parse_checkpoint(std::span<const char> bytes, const std::string& what) {
  detail::ByteReader rd(bytes, what);
  if (rd.get_string(kMagic.size()) != std::string(kMagic.data(), kMagic.size()))
    throw FormatError(what + ": not a checkpoint (bad magic)");
  const auto version = rd.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion)
    throw FormatError(what + ": unsupported checkpoint format version " + std::to_string(version));
  rd.get<std::uint32_t>();
  const auto header_len = rd.get<std::uint64_t>();
  if (header_len > rd.remaining()) throw FormatError(what + ": truncated header");
  Checkpoint c;
  try {
    const json h = json::parse(rd.get_string(header_len));
    nn::CnnSpec spec = spec_from_json(h.at("architecture"));
    c.representation = parse_representation(h.at("representation").get<std::string>());
    c.compensated = h.at("compensated").get<bool>();
    const json& sp = h.at("spectrogram");
    c.spectrogram.window_len = sp.at("window_len").get<std::size_t>();
    c.spectrogram.hop = sp.at("hop").get<std::size_t>();
    c.spectrogram.epsilon = sp.at("epsilon").get<double>();
    c.spectrogram.standardize = sp.at("standardize").get<bool>();
    c.lora = detail::lora_from_json(h.at("lora"));
    c.model.device_ids = h.at("device_ids").get<std::vector<int>>();
    c.database.lambda = detail::read_number_or_inf(h.at("cfo_database").at("lambda"));
    for (const json& r : h.at("cfo_database").at("reference"))
      c.database.reference[r.at(0).get<int>()] = r.at(1).get<double>();
    c.dataset.profiles_digest = h.at("dataset").at("profiles_digest").get<std::string>();
    c.dataset.master_seed = h.at("dataset").at("master_seed").get<std::uint64_t>();
    c.train_selection = selection_from_json(h.at("train_selection"));
    if (static_cast<int>(c.model.device_ids.size()) != spec.num_classes)
      throw FormatError(what + ": class list does not match the architecture");

    c.model.net = nn::Network<float>(spec, 0);
    auto params = c.model.net.parameters();
    auto state = c.model.net.state();
    std::vector<std::span<float>> targets;
    std::vector<std::string> names;
    for (auto& p : params) {
      targets.push_back(p.value);
      names.push_back(p.name);
    }
    for (auto& s : state) {
      targets.push_back(s.value);
      names.push_back(s.name);
    }
    const json& dir = h.at("tensors");
    if (dir.size() != targets.size()) throw FormatError(what + ": tensor directory does not match the architecture");
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (dir[i].at("name").get<std::string>() != names[i] ||
          dir[i].at("count").get<std::size_t>() != targets[i].size())
        throw FormatError(what + ": tensor " + std::to_string(i) + " does not match " + names[i]);
      rd.get_array(targets[i]);
    }
  } catch (const json::exception& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(what + ": invalid architecture: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(what + ": " + e.what());
  }
  if (rd.remaining() != 0) throw FormatError(what + ": " + std::to_string(rd.remaining()) + " trailing bytes");
  return c;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  std::vector<char> bytes(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

}  // namespace lorafp
