#pragma once

#include <cmath>
#include <json.hpp>
#include <limits>
#include <string>

#include "lorafp/devsim.hpp"
#include "lorafp/error.hpp"

namespace lorafp::detail {

using nlohmann::json;

/// JSON has no infinities; +inf is written as the string "inf".
inline json number_or_inf(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

inline double read_number_or_inf(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

inline json to_json(const LoRaParams& p) {
  return json{{"sf", p.sf}, {"bw", p.bw}, {"fc", p.fc}, {"ts", p.ts}, {"n_preambles", p.n_preambles}};
}

inline LoRaParams lora_from_json(const json& j) {
  LoRaParams p;
  p.sf = j.at("sf").get<int>();
  p.bw = j.at("bw").get<double>();
  p.fc = j.at("fc").get<double>();
  p.ts = j.at("ts").get<double>();
  p.n_preambles = j.at("n_preambles").get<int>();
  return p;
}

inline json to_json(const DeviceProfile& p) {
  return json{{"device_id", p.device_id},
              {"cfo_base", p.cfo_base},
              {"cfo_warmup_amp", p.cfo_warmup_amp},
              {"cfo_warmup_tau", p.cfo_warmup_tau},
              {"cfo_day_sigma", p.cfo_day_sigma},
              {"cfo_jitter_sigma", p.cfo_jitter_sigma},
              {"iq_gain_mismatch", p.iq_gain_mismatch},
              {"iq_phase_error", p.iq_phase_error},
              {"pa_a1", p.pa_a1},
              {"pa_a3", p.pa_a3}};
}

inline DeviceProfile profile_from_json(const json& j) {
  DeviceProfile p;
  p.device_id = j.at("device_id").get<int>();
  p.cfo_base = j.at("cfo_base").get<double>();
  p.cfo_warmup_amp = j.at("cfo_warmup_amp").get<double>();
  p.cfo_warmup_tau = j.at("cfo_warmup_tau").get<double>();
  p.cfo_day_sigma = j.at("cfo_day_sigma").get<double>();
  p.cfo_jitter_sigma = j.at("cfo_jitter_sigma").get<double>();
  p.iq_gain_mismatch = j.at("iq_gain_mismatch").get<double>();
  p.iq_phase_error = j.at("iq_phase_error").get<double>();
  p.pa_a1 = j.at("pa_a1").get<double>();
  p.pa_a3 = j.at("pa_a3").get<double>();
  return p;
}

inline json to_json(const CaptureSchedule& s) {
  json sessions = json::array();
  for (const SessionPlan& p : s.sessions)
    sessions.push_back({{"session_index", p.session_index}, {"packets", p.packets}});
  return json{{"sessions", sessions},
              {"interval", s.interval},
              {"snr_db", number_or_inf(s.snr_db)},
              {"leading_padding", s.leading_padding}};
}

inline CaptureSchedule schedule_from_json(const json& j) {
  CaptureSchedule s;
  for (const json& p : j.at("sessions"))
    s.sessions.push_back({p.at("session_index").get<int>(), p.at("packets").get<int>()});
  s.interval = j.at("interval").get<double>();
  s.snr_db = read_number_or_inf(j.at("snr_db"));
  s.leading_padding = j.at("leading_padding").get<std::size_t>();
  return s;
}

}  // namespace lorafp::detail
