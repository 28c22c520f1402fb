#include "lorafp/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "lorafp/error.hpp"

namespace lorafp {

std::string Selection::describe() const {
  std::ostringstream s;
  s << "sessions=";
  if (sessions.empty()) s << "all";
  for (std::size_t i = 0; i < sessions.size(); ++i) s << (i ? ";" : "") << sessions[i];
  s << " packets=" << first << "..";
  if (count == 0)
    s << "end";
  else
    s << first + count - 1;
  return s.str();
}

bool overlaps(const Selection& a, const Selection& b, const std::vector<SessionPlan>& sessions) {
  for (const SessionPlan& plan : sessions) {
    const auto in = [&](const Selection& s) {
      return s.sessions.empty() ||
             std::find(s.sessions.begin(), s.sessions.end(), plan.session_index) != s.sessions.end();
    };
    if (!in(a) || !in(b)) continue;
    const auto total = static_cast<std::size_t>(plan.packets);
    const auto end = [total](const Selection& s) { return s.count == 0 ? total : std::min(total, s.first + s.count); };
    const std::size_t lo = std::max(a.first, b.first), hi = std::min(end(a), end(b));
    if (lo < hi) return true;
  }
  return false;
}

void ExperimentConfig::validate() const {
  lora.validate();
  if (profiles.size() < 2) throw ConfigError("devices: at least two devices are required");
  std::set<int> ids;
  for (const DeviceProfile& p : profiles) {
    p.validate(lora.fc);
    if (!ids.insert(p.device_id).second)
      throw ConfigError("devices: device_id " + std::to_string(p.device_id) + " appears twice");
  }
  schedule.validate();
  train.validate();
  if (!(lambda > 0.0)) throw ConfigError("train.lambda must be positive");
  if (spectrogram.window_len < 1 || spectrogram.hop < 1)
    throw ConfigError("spectrogram: window_len and hop must be positive");
  for (int f : model.filters)
    if (f < 1) throw ConfigError("model.filters must be positive");
  for (int k : model.kernel_w)
    if (k < 1) throw ConfigError("model.kernel_w must be positive");
  if (model.kernel < 1) throw ConfigError("model.kernel must be positive");
  if (model.pool < 1) throw ConfigError("model.pool must be positive");
}

nn::CnnSpec make_spec(Representation kind, nn::Shape input, int num_classes, const ModelConfig& model) {
  if (kind == Representation::spectrogram)
    return nn::CnnSpec::spectrogram(input, num_classes, model.filters, model.kernel);
  auto spec = nn::CnnSpec::iq_fft(input, num_classes, model.filters, model.kernel_w, model.pool);
  spec.name = to_string(kind);
  return spec;
}

namespace {

void require_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, const std::string& where, T& out) {
  const YAML::Node v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": cannot parse '" + YAML::Dump(v) + "'");
  }
}

void read_double(const YAML::Node& node, const char* key, const std::string& where, double& out) {
  const YAML::Node v = node[key];
  if (!v) return;
  const auto text = v.as<std::string>();
  if (text == "inf" || text == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return;
  }
  read(node, key, where, out);
}

template <std::size_t N>
void read_array(const YAML::Node& node, const char* key, const std::string& where, std::array<int, N>& out) {
  const YAML::Node v = node[key];
  if (!v) return;
  if (!v.IsSequence() || v.size() != N)
    throw ConfigError(where + "." + key + ": expected a list of " + std::to_string(N) + " integers");
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i].as<int>();
}

void read_profile_fields(const YAML::Node& n, const std::string& where, DeviceProfile& p) {
  require_keys(n, where,
               {"device_id", "cfo_base", "cfo_warmup_amp", "cfo_warmup_tau", "cfo_day_sigma", "cfo_jitter_sigma",
                "iq_gain_mismatch", "iq_phase_error", "pa_a1", "pa_a3"});
  read(n, "device_id", where, p.device_id);
  read_double(n, "cfo_base", where, p.cfo_base);
  read_double(n, "cfo_warmup_amp", where, p.cfo_warmup_amp);
  read_double(n, "cfo_warmup_tau", where, p.cfo_warmup_tau);
  read_double(n, "cfo_day_sigma", where, p.cfo_day_sigma);
  read_double(n, "cfo_jitter_sigma", where, p.cfo_jitter_sigma);
  read_double(n, "iq_gain_mismatch", where, p.iq_gain_mismatch);
  read_double(n, "iq_phase_error", where, p.iq_phase_error);
  read_double(n, "pa_a1", where, p.pa_a1);
  read_double(n, "pa_a3", where, p.pa_a3);
}

/// A given block stands alone: omitted keys mean every session, from packet 0, to the end.
Selection read_selection(const YAML::Node& n, const std::string& where, const Selection& fallback) {
  if (!n) return fallback;
  require_keys(n, where, {"sessions", "first", "count"});
  Selection s;
  if (n["sessions"]) {
    if (!n["sessions"].IsSequence()) throw ConfigError(where + ".sessions: expected a list");
    for (const auto& v : n["sessions"]) s.sessions.push_back(v.as<int>());
  }
  read(n, "first", where, s.first);
  read(n, "count", where, s.count);
  return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  require_keys(root, "config", {"lora", "devices", "schedule", "seed", "spectrogram", "model", "train", "eval"});
  ExperimentConfig c;

  if (const auto n = root["lora"]) {
    require_keys(n, "lora", {"sf", "bw", "fc", "ts", "n_preambles"});
    read(n, "sf", "lora", c.lora.sf);
    read_double(n, "bw", "lora", c.lora.bw);
    read_double(n, "fc", "lora", c.lora.fc);
    read_double(n, "ts", "lora", c.lora.ts);
    read(n, "n_preambles", "lora", c.lora.n_preambles);
  }

  const YAML::Node dev = root["devices"];
  if (!dev) throw ConfigError("devices: missing (give count or profiles)");
  require_keys(dev, "devices", {"count", "seed", "ranges", "overrides", "profiles"});
  if (dev["profiles"]) {
    if (dev["count"] || dev["ranges"] || dev["overrides"])
      throw ConfigError("devices: profiles cannot be combined with count, ranges or overrides");
    int i = 0;
    for (const auto& p : dev["profiles"]) {
      DeviceProfile prof;
      prof.device_id = ++i;
      read_profile_fields(p, "devices.profiles[" + std::to_string(i - 1) + "]", prof);
      c.profiles.push_back(prof);
    }
  } else {
    int count = 0;
    std::uint64_t seed = 1;
    read(dev, "count", "devices", count);
    read(dev, "seed", "devices", seed);
    if (count < 2) throw ConfigError("devices.count: at least two devices are required");
    ProfileRanges r;
    if (const auto rn = dev["ranges"]) {
      const std::string w = "devices.ranges";
      require_keys(rn, w,
                   {"cfo_base_ppm", "warmup_amp_min", "warmup_amp_max", "warmup_tau_min", "warmup_tau_max", "day_sigma",
                    "jitter_sigma", "iq_gain_dev", "iq_phase_max", "pa_a1_min", "pa_a1_max", "pa_a3_min", "pa_a3_max"});
      read_double(rn, "cfo_base_ppm", w, r.cfo_base_ppm);
      read_double(rn, "warmup_amp_min", w, r.warmup_amp_min);
      read_double(rn, "warmup_amp_max", w, r.warmup_amp_max);
      read_double(rn, "warmup_tau_min", w, r.warmup_tau_min);
      read_double(rn, "warmup_tau_max", w, r.warmup_tau_max);
      read_double(rn, "day_sigma", w, r.day_sigma);
      read_double(rn, "jitter_sigma", w, r.jitter_sigma);
      read_double(rn, "iq_gain_dev", w, r.iq_gain_dev);
      read_double(rn, "iq_phase_max", w, r.iq_phase_max);
      read_double(rn, "pa_a1_min", w, r.pa_a1_min);
      read_double(rn, "pa_a1_max", w, r.pa_a1_max);
      read_double(rn, "pa_a3_min", w, r.pa_a3_min);
      read_double(rn, "pa_a3_max", w, r.pa_a3_max);
    }
    c.profiles = sample_profiles(count, c.lora.fc, seed, r);
    if (const auto ov = dev["overrides"]) {
      std::size_t i = 0;
      for (const auto& o : ov) {
        const std::string w = "devices.overrides[" + std::to_string(i++) + "]";
        if (!o["device_id"]) throw ConfigError(w + ": device_id is required");
        const int id = o["device_id"].as<int>();
        auto it = std::find_if(c.profiles.begin(), c.profiles.end(),
                               [id](const DeviceProfile& p) { return p.device_id == id; });
        if (it == c.profiles.end()) throw ConfigError(w + ": no sampled device with id " + std::to_string(id));
        read_profile_fields(o, w, *it);
      }
    }
  }

  if (const auto n = root["schedule"]) {
    require_keys(n, "schedule", {"interval", "snr_db", "leading_padding", "sessions"});
    read_double(n, "interval", "schedule", c.schedule.interval);
    read_double(n, "snr_db", "schedule", c.schedule.snr_db);
    read(n, "leading_padding", "schedule", c.schedule.leading_padding);
    if (const auto s = n["sessions"]) {
      std::size_t i = 0;
      for (const auto& plan : s) {
        const std::string w = "schedule.sessions[" + std::to_string(i++) + "]";
        require_keys(plan, w, {"session", "packets"});
        SessionPlan p;
        p.session_index = static_cast<int>(i);
        read(plan, "session", w, p.session_index);
        read(plan, "packets", w, p.packets);
        c.schedule.sessions.push_back(p);
      }
    }
  }
  if (c.schedule.sessions.empty()) throw ConfigError("schedule.sessions: at least one session is required");

  read(root, "seed", "config", c.seed);

  if (const auto n = root["spectrogram"]) {
    require_keys(n, "spectrogram", {"window_len", "hop"});
    read(n, "window_len", "spectrogram", c.spectrogram.window_len);
    read(n, "hop", "spectrogram", c.spectrogram.hop);
  }
  if (const auto n = root["model"]) {
    require_keys(n, "model", {"filters", "kernel", "kernel_w", "pool"});
    read_array(n, "filters", "model", c.model.filters);
    read(n, "kernel", "model", c.model.kernel);
    read_array(n, "kernel_w", "model", c.model.kernel_w);
    read(n, "pool", "model", c.model.pool);
  }
  if (const auto n = root["train"]) {
    const std::string w = "train";
    require_keys(n, w,
                 {"epochs", "batch_size", "initial_lr", "lr_drop_period", "lr_drop_factor", "beta1", "beta2", "epsilon",
                  "patience", "validation_fraction", "seed", "lambda", "select"});
    read(n, "epochs", w, c.train.epochs);
    read(n, "batch_size", w, c.train.batch_size);
    read_double(n, "initial_lr", w, c.train.initial_lr);
    read(n, "lr_drop_period", w, c.train.lr_drop_period);
    read_double(n, "lr_drop_factor", w, c.train.lr_drop_factor);
    read_double(n, "beta1", w, c.train.beta1);
    read_double(n, "beta2", w, c.train.beta2);
    read_double(n, "epsilon", w, c.train.epsilon);
    read(n, "patience", w, c.train.patience);
    read_double(n, "validation_fraction", w, c.train.validation_fraction);
    read(n, "seed", w, c.train.seed);
    read_double(n, "lambda", w, c.lambda);
    c.train_selection = read_selection(n["select"], "train.select", c.train_selection);
  }
  if (const auto n = root["eval"]) {
    require_keys(n, "eval", {"select"});
    c.test_selection = read_selection(n["select"], "eval.select", c.test_selection);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace lorafp
