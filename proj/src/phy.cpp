#include "lorafp/phy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lorafp/error.hpp"

namespace lorafp {

namespace {

std::string describe(const LoRaParams& p) {
  std::ostringstream os;
  os << "(sf=" << p.sf << ", bw=" << p.bw << " Hz, ts=" << p.ts << " s)";
  return os.str();
}

}  // namespace

void LoRaParams::validate() const {
  if (sf < 7 || sf > 12) throw ConfigError("sf = " + std::to_string(sf) + " outside 7..12");
  if (!(bw > 0.0) || !std::isfinite(bw)) throw ConfigError("bandwidth must be positive");
  if (!(ts > 0.0) || !std::isfinite(ts)) throw ConfigError("sample interval must be positive");
  if (!(fc > 0.0) || !std::isfinite(fc)) throw ConfigError("carrier frequency must be positive");
  // allow rounding noise of the ts literal (1e-6 is not exact in binary)
  if (1.0 / ts < bw * (1.0 - 1e-12)) throw ConfigError("sample rate below bandwidth " + describe(*this));
  if (n_preambles < 2) throw ConfigError("n_preambles must be at least 2");
  (void)symbol_length(*this);
}

double LoRaParams::symbol_duration() const { return std::ldexp(1.0, sf) / bw; }

double LoRaParams::fine_cfo_limit() const { return bw / std::ldexp(1.0, sf + 1); }

ComplexSignal::ComplexSignal(std::vector<cplx> samples, double ts) : samples_(std::move(samples)), ts_(ts) {
  if (samples_.empty()) throw SignalError("signal has no samples");
  if (!(ts_ > 0.0) || !std::isfinite(ts_)) throw SignalError("signal sample interval must be positive");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i].real()) || !std::isfinite(samples_[i].imag()))
      throw SignalError("non-finite sample at index " + std::to_string(i));
  }
}

ComplexSignal ComplexSignal::slice(std::size_t first, std::size_t count) const {
  if (first + count > samples_.size() || count == 0)
    throw ShapeError("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") outside signal of length " + std::to_string(samples_.size()));
  return ComplexSignal({samples_.begin() + static_cast<std::ptrdiff_t>(first),
                        samples_.begin() + static_cast<std::ptrdiff_t>(first + count)},
                       ts_);
}

std::size_t symbol_length(const LoRaParams& params) {
  if (!(params.bw > 0.0) || !(params.ts > 0.0))
    throw ConfigError("symbol length needs positive bw and ts " + describe(params));
  const double exact = std::ldexp(1.0, params.sf) / (params.bw * params.ts);
  const double rounded = std::round(exact);
  if (rounded < 1.0 || std::abs(exact - rounded) > 1e-9 * exact)
    throw ConfigError("symbol length 2^sf/(bw*ts) = " + std::to_string(exact) + " is not an integer for " +
                      describe(params));
  return static_cast<std::size_t>(rounded);
}

ComplexSignal basic_chirp(const LoRaParams& params, double amplitude) {
  params.validate();
  if (!(amplitude > 0.0)) throw ConfigError("chirp amplitude must be positive");
  const std::size_t len = symbol_length(params);
  const double big_l = static_cast<double>(len);
  const double chips = std::ldexp(1.0, params.sf);
  std::vector<cplx> out(len);
  for (std::size_t n = 0; n < len; ++n) {
    // phase / pi = B ts n (n/L - 1) = 2^sf n (n - L) / L^2, reduced mod 2 before scaling
    const double nn = static_cast<double>(n);
    const double half_turns = std::fmod(chips * (nn * (nn - big_l)) / (big_l * big_l), 2.0);
    const double phase = std::numbers::pi * half_turns;
    out[n] = std::polar(amplitude, phase);
  }
  return ComplexSignal(std::move(out), params.ts);
}

ComplexSignal preamble_sequence(const LoRaParams& params, double amplitude) {
  const ComplexSignal chirp = basic_chirp(params, amplitude);
  std::vector<cplx> out;
  out.reserve(chirp.size() * static_cast<std::size_t>(params.n_preambles));
  for (int k = 0; k < params.n_preambles; ++k) out.insert(out.end(), chirp.samples().begin(), chirp.samples().end());
  return ComplexSignal(std::move(out), params.ts);
}

std::vector<double> instantaneous_frequency(const ComplexSignal& signal) {
  if (signal.size() < 2) throw SignalError("instantaneous frequency needs at least two samples");
  const auto x = signal.samples();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == cplx{0.0, 0.0})
      throw SignalError("undefined phase: zero-magnitude sample at index " + std::to_string(i));
  }
  const double scale = 1.0 / (2.0 * std::numbers::pi * signal.ts());
  std::vector<double> f(x.size() - 1);
  for (std::size_t n = 0; n + 1 < x.size(); ++n) {
    double angle = std::arg(x[n + 1] * std::conj(x[n]));
    if (angle >= std::numbers::pi) angle = -std::numbers::pi;
    f[n] = angle * scale;
  }
  return f;
}

}  // namespace lorafp
