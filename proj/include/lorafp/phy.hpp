#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace lorafp {

using cplx = std::complex<double>;

/// LoRa modulation parameters shared by the whole chain.
struct LoRaParams {
  int sf = 7;           ///< spreading factor, 7..12
  double bw = 125e3;    ///< bandwidth [Hz]
  double fc = 868.1e6;  ///< carrier frequency [Hz]
  double ts = 1e-6;     ///< sample interval [s]
  int n_preambles = 8;  ///< repeated basic chirps per packet

  /// Throws ConfigError when any invariant is violated (including a non-integer symbol length).
  void validate() const;

  double symbol_duration() const;  ///< T = 2^sf / bw
  double sample_rate() const { return 1.0 / ts; }
  /// Largest offset the repeated-preamble estimator resolves: bw / 2^(sf+1).
  double fine_cfo_limit() const;

  bool operator==(const LoRaParams&) const = default;
};

/// Complex baseband samples with their sample interval.
class ComplexSignal {
 public:
  /// Throws SignalError when samples is empty, ts is not positive or a sample is not finite.
  ComplexSignal(std::vector<cplx> samples, double ts);

  std::size_t size() const noexcept { return samples_.size(); }
  double ts() const noexcept { return ts_; }
  std::span<const cplx> samples() const noexcept { return samples_; }
  const cplx& operator[](std::size_t i) const { return samples_[i]; }

  /// Copy of samples [first, first + count).
  ComplexSignal slice(std::size_t first, std::size_t count) const;

  std::vector<cplx> release() && { return std::move(samples_); }

 private:
  std::vector<cplx> samples_;
  double ts_;
};

/// Samples per symbol, 2^sf / (bw * ts). Throws ConfigError if not an integer.
std::size_t symbol_length(const LoRaParams& params);

/// One unmodulated up-chirp u[n] = A exp(j(-pi B t + pi (B/T) t^2)), t = n ts.
ComplexSignal basic_chirp(const LoRaParams& params, double amplitude = 1.0);

/// n_preambles back-to-back basic chirps.
ComplexSignal preamble_sequence(const LoRaParams& params, double amplitude = 1.0);

/// Phase-difference discriminator: f[n] = arg(x[n+1] conj(x[n])) / (2 pi ts), in [-1/(2ts), 1/(2ts)).
/// Returns size()-1 values. Throws SignalError on a zero-magnitude sample.
std::vector<double> instantaneous_frequency(const ComplexSignal& signal);

}  // namespace lorafp
