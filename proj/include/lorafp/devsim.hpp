#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

#include "lorafp/phy.hpp"

namespace lorafp {

/// Impairment fingerprint of one simulated transmitter.
struct DeviceProfile {
  int device_id = 1;
  double cfo_base = 0.0;          ///< long-term mean CFO [Hz]
  double cfo_warmup_amp = 0.0;    ///< extra CFO right after power-on [Hz]
  double cfo_warmup_tau = 300.0;  ///< warm-up decay constant [s]
  double cfo_day_sigma = 0.0;     ///< std-dev of the per-session offset [Hz]
  double cfo_jitter_sigma = 0.0;  ///< per-packet jitter std-dev [Hz]
  double iq_gain_mismatch = 1.0;
  double iq_phase_error = 0.0;  ///< [rad]
  double pa_a1 = 1.0;
  double pa_a3 = 0.0;

  /// Throws ConfigError. The CFO bound is 10 ppm of fc.
  void validate(double fc) const;

  /// A profile that leaves the clean chirp untouched (no CFO, no drift).
  static DeviceProfile identity(int device_id = 1);

  bool operator==(const DeviceProfile&) const = default;
};

struct EmissionContext {
  int session_index = 1;
  double elapsed = 0.0;  ///< seconds since power-on
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t rng_seed = 0;
};

struct PacketRecord {
  ComplexSignal signal;
  int true_device = 0;
  double true_cfo = 0.0;
  EmissionContext context;
};

/// Per-session CFO offset of a device; a deterministic function of (device_id, session_index).
double day_offset(const DeviceProfile& profile, int session_index);

/// CFO applied to a packet: base + day offset + warm-up decay + jitter.
/// Gaussian draws are truncated at 5 sigma by re-sampling.
double cfo_at(const DeviceProfile& profile, const EmissionContext& context);

/// IQ imbalance, then memoryless third-order PA, then frequency offset.
ComplexSignal apply_impairments(const ComplexSignal& clean, const DeviceProfile& profile, double cfo);

/// Preamble through the device impairments and an AWGN channel.
/// leading_padding noise-only samples are prepended when non-zero.
PacketRecord emit_packet(const LoRaParams& params, const DeviceProfile& profile, const EmissionContext& context,
                         std::size_t leading_padding = 0);

/// Ranges the random profile sampler draws from.
struct ProfileRanges {
  double cfo_base_ppm = 10.0;  ///< cfo_base ~ U(-ppm*fc, +ppm*fc)
  double warmup_amp_min = 100.0, warmup_amp_max = 500.0;
  double warmup_tau_min = 200.0, warmup_tau_max = 600.0;
  double day_sigma = 100.0;
  double jitter_sigma = 10.0;
  double iq_gain_dev = 0.1;   ///< gain ~ U(1-dev, 1+dev)
  double iq_phase_max = 0.1;  ///< phase ~ U(-max, max) [rad]
  double pa_a1_min = 0.9, pa_a1_max = 1.1;
  double pa_a3_min = -0.12, pa_a3_max = -0.02;
};

/// count profiles with ids 1..count.
std::vector<DeviceProfile> sample_profiles(int count, double fc, std::uint64_t seed, const ProfileRanges& ranges = {});

struct SessionPlan {
  int session_index = 1;
  int packets = 0;  ///< per device
};

struct CaptureSchedule {
  std::vector<SessionPlan> sessions;
  double interval = 1.0;  ///< seconds between consecutive packets of a device
  double snr_db = 30.0;   ///< +inf disables noise
  std::size_t leading_padding = 0;

  void validate() const;
  std::size_t packets_per_device() const;
};

/// Seed of packet k of a device within a session.
std::uint64_t packet_seed(std::uint64_t master_seed, int device_id, int session_index, int packet_index);

/// Emits every packet of the capture plan in container order (session, device, packet).
/// Packets are synthesized in parallel chunks; sink is called sequentially in order.
void for_each_packet(const LoRaParams& params, const std::vector<DeviceProfile>& profiles,
                     const CaptureSchedule& schedule, std::uint64_t master_seed,
                     const std::function<void(const PacketRecord&)>& sink);

/// Writes the whole capture plan to a dataset container at path.
void generate_dataset(const LoRaParams& params, const std::vector<DeviceProfile>& profiles,
                      const CaptureSchedule& schedule, std::uint64_t master_seed, const std::filesystem::path& path);

}  // namespace lorafp
