#include "lorafp/devsim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <optional>
#include <random>

#include "lorafp/dataset.hpp"
#include "lorafp/error.hpp"
#include "lorafp/seeding.hpp"

namespace lorafp {

namespace {

constexpr double kPpm = 1e-6;
constexpr double kTruncation = 5.0;

double truncated_normal(std::mt19937_64& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  for (;;) {
    const double v = sigma * normal_pair(rng).first;
    if (std::abs(v) <= kTruncation * sigma) return v;
  }
}

}  // namespace

void DeviceProfile::validate(double fc) const {
  const auto bad = [this](const std::string& what) {
    return ConfigError("device " + std::to_string(device_id) + ": " + what);
  };
  if (std::abs(cfo_base) > 10.0 * kPpm * fc * (1.0 + 1e-12)) throw bad("|cfo_base| exceeds 10 ppm of fc");
  if (!(cfo_warmup_tau > 0.0)) throw bad("cfo_warmup_tau must be positive");
  if (!(cfo_day_sigma >= 0.0)) throw bad("cfo_day_sigma must be non-negative");
  if (!(cfo_jitter_sigma >= 0.0)) throw bad("cfo_jitter_sigma must be non-negative");
  if (!(pa_a1 > 0.0)) throw bad("pa_a1 must be positive");
  if (!(iq_gain_mismatch > 0.5 && iq_gain_mismatch < 2.0)) throw bad("iq_gain_mismatch must lie in (0.5, 2)");
  if (!std::isfinite(cfo_warmup_amp) || !std::isfinite(iq_phase_error) || !std::isfinite(pa_a3))
    throw bad("non-finite impairment parameter");
}

DeviceProfile DeviceProfile::identity(int device_id) {
  DeviceProfile p;
  p.device_id = device_id;
  return p;
}

double day_offset(const DeviceProfile& profile, int session_index) {
  std::mt19937_64 rng(derive_seed(
      {0xda7ULL, static_cast<std::uint64_t>(profile.device_id), static_cast<std::uint64_t>(session_index)}));
  return truncated_normal(rng, profile.cfo_day_sigma);
}

double cfo_at(const DeviceProfile& profile, const EmissionContext& context) {
  if (context.elapsed < 0.0) throw ConfigError("elapsed time must be non-negative");
  std::mt19937_64 rng(derive_seed({0x717ULL, context.rng_seed}));
  const double jitter = truncated_normal(rng, profile.cfo_jitter_sigma);
  const double warmup = profile.cfo_warmup_amp * std::exp(-context.elapsed / profile.cfo_warmup_tau);
  return profile.cfo_base + day_offset(profile, context.session_index) + warmup + jitter;
}

ComplexSignal apply_impairments(const ComplexSignal& clean, const DeviceProfile& profile, double cfo) {
  const auto x = clean.samples();
  std::vector<cplx> out(x.size());
  const double cos_phi = std::cos(profile.iq_phase_error);
  const double sin_phi = std::sin(profile.iq_phase_error);
  const double step = 2.0 * std::numbers::pi * cfo * clean.ts();
  const bool identity_iq = profile.iq_gain_mismatch == 1.0 && profile.iq_phase_error == 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double re = x[n].real();
    const double im = x[n].imag();
    const cplx y = identity_iq ? x[n] : cplx{re * profile.iq_gain_mismatch, im * cos_phi + re * sin_phi};
    cplx z = profile.pa_a3 == 0.0 ? profile.pa_a1 * y : profile.pa_a1 * y + profile.pa_a3 * y * std::norm(y);
    if (cfo != 0.0) z *= std::polar(1.0, step * static_cast<double>(n));
    out[n] = z;
  }
  return ComplexSignal(std::move(out), clean.ts());
}

PacketRecord emit_packet(const LoRaParams& params, const DeviceProfile& profile, const EmissionContext& context,
                         std::size_t leading_padding) {
  params.validate();
  profile.validate(params.fc);
  const double cfo = cfo_at(profile, context);
  const ComplexSignal tx = apply_impairments(preamble_sequence(params), profile, cfo);

  std::vector<cplx> samples(leading_padding, cplx{});
  samples.insert(samples.end(), tx.samples().begin(), tx.samples().end());

  if (std::isfinite(context.snr_db)) {
    double power = 0.0;
    for (const cplx& s : tx.samples()) power += std::norm(s);
    power /= static_cast<double>(tx.size());
    const double sigma = std::sqrt(power / std::pow(10.0, context.snr_db / 10.0) / 2.0);
    std::mt19937_64 rng(derive_seed({0x401eULL, context.rng_seed}));
    for (cplx& s : samples) {
      const auto [re, im] = normal_pair(rng);
      s += cplx{sigma * re, sigma * im};
    }
  } else if (context.snr_db < 0.0) {
    throw ConfigError("snr_db of -inf leaves no signal");
  }
  return PacketRecord{ComplexSignal(std::move(samples), params.ts), profile.device_id, cfo, context};
}

std::vector<DeviceProfile> sample_profiles(int count, double fc, std::uint64_t seed, const ProfileRanges& r) {
  if (count < 1) throw ConfigError("profile count must be positive");
  std::mt19937_64 rng(derive_seed({0x9f0fULL, seed}));
  const auto uniform = [&rng](double lo, double hi) { return lorafp::uniform(rng, lo, hi); };
  const double cfo_limit = r.cfo_base_ppm * kPpm * fc;
  std::vector<DeviceProfile> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int id = 1; id <= count; ++id) {
    DeviceProfile p;
    p.device_id = id;
    p.cfo_base = uniform(-cfo_limit, cfo_limit);
    p.cfo_warmup_amp = uniform(r.warmup_amp_min, r.warmup_amp_max);
    p.cfo_warmup_tau = uniform(r.warmup_tau_min, r.warmup_tau_max);
    p.cfo_day_sigma = r.day_sigma;
    p.cfo_jitter_sigma = r.jitter_sigma;
    p.iq_gain_mismatch = uniform(1.0 - r.iq_gain_dev, 1.0 + r.iq_gain_dev);
    p.iq_phase_error = uniform(-r.iq_phase_max, r.iq_phase_max);
    p.pa_a1 = uniform(r.pa_a1_min, r.pa_a1_max);
    p.pa_a3 = uniform(r.pa_a3_min, r.pa_a3_max);
    out.push_back(p);
  }
  return out;
}

void CaptureSchedule::validate() const {
  if (sessions.empty()) throw ConfigError("schedule has no sessions");
  for (const SessionPlan& s : sessions) {
    if (s.packets < 1) throw ConfigError("session " + std::to_string(s.session_index) + " has no packets");
  }
  if (!(interval > 0.0)) throw ConfigError("packet interval must be positive");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw ConfigError("snr_db must be a number or +inf");
}

std::size_t CaptureSchedule::packets_per_device() const {
  std::size_t total = 0;
  for (const SessionPlan& s : sessions) total += static_cast<std::size_t>(s.packets);
  return total;
}

std::uint64_t packet_seed(std::uint64_t master_seed, int device_id, int session_index, int packet_index) {
  return derive_seed({master_seed, static_cast<std::uint64_t>(device_id), static_cast<std::uint64_t>(session_index),
                      static_cast<std::uint64_t>(packet_index)});
}

void for_each_packet(const LoRaParams& params, const std::vector<DeviceProfile>& profiles,
                     const CaptureSchedule& schedule, std::uint64_t master_seed,
                     const std::function<void(const PacketRecord&)>& sink) {
  params.validate();
  schedule.validate();
  if (profiles.size() < 2) throw ConfigError("a capture needs at least two device profiles");
  for (const DeviceProfile& p : profiles) p.validate(params.fc);

  constexpr int kChunk = 64;
  std::vector<std::optional<PacketRecord>> chunk(kChunk);
  for (const SessionPlan& session : schedule.sessions) {
    for (const DeviceProfile& profile : profiles) {
      for (int first = 0; first < session.packets; first += kChunk) {
        const int count = std::min(kChunk, session.packets - first);
        std::vector<std::exception_ptr> failures(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
        for (int i = 0; i < count; ++i) {
          try {
            const int k = first + i;
            EmissionContext ctx;
            ctx.session_index = session.session_index;
            ctx.elapsed = static_cast<double>(k) * schedule.interval;
            ctx.snr_db = schedule.snr_db;
            ctx.rng_seed = packet_seed(master_seed, profile.device_id, session.session_index, k);
            chunk[static_cast<std::size_t>(i)] = emit_packet(params, profile, ctx, schedule.leading_padding);
          } catch (...) {
            failures[static_cast<std::size_t>(i)] = std::current_exception();
          }
        }
        for (const auto& f : failures)
          if (f) std::rethrow_exception(f);
        for (int i = 0; i < count; ++i) {
          sink(*chunk[static_cast<std::size_t>(i)]);
          chunk[static_cast<std::size_t>(i)].reset();
        }
      }
    }
  }
}

void generate_dataset(const LoRaParams& params, const std::vector<DeviceProfile>& profiles,
                      const CaptureSchedule& schedule, std::uint64_t master_seed, const std::filesystem::path& path) {
  DatasetWriter writer(path, DatasetManifest::make(params, profiles, schedule, master_seed));
  for_each_packet(params, profiles, schedule, master_seed, [&writer](const PacketRecord& r) { writer.append(r); });
  writer.finish();
}

}  // namespace lorafp
