#include "lorafp/receiver.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "lorafp/error.hpp"

namespace lorafp {

namespace {

std::size_t whole_symbols(const ComplexSignal& s, std::size_t len) { return s.size() / len; }

double mean(const std::vector<double>& v) {
  // fixed-order sum, compensated
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(v.size());
}

}  // namespace

SyncResult synchronize(const ComplexSignal& signal, const LoRaParams& params, double confidence_floor) {
  const std::size_t len = symbol_length(params);
  const std::size_t packet = len * static_cast<std::size_t>(params.n_preambles);
  if (signal.size() < packet)
    throw ShapeError("signal of " + std::to_string(signal.size()) + " samples is shorter than one preamble (" +
                     std::to_string(packet) + ")");
  const ComplexSignal ref = basic_chirp(params);
  const auto x = signal.samples();
  const auto u = ref.samples();
  const double ref_energy = static_cast<double>(len);  // unit-modulus reference

  // running window energy
  double window_energy = 0.0;
  for (std::size_t n = 0; n < len; ++n) window_energy += std::norm(x[n]);

  SyncResult best;
  const std::size_t last = signal.size() - packet;
  for (std::size_t d = 0; d <= last; ++d) {
    if (d > 0) {
      window_energy += std::norm(x[d + len - 1]) - std::norm(x[d - 1]);
      if (window_energy < 0.0) window_energy = 0.0;
    }
    cplx acc{};
    for (std::size_t n = 0; n < len; ++n) acc += x[d + n] * std::conj(u[n]);
    const double denom = std::sqrt(window_energy * ref_energy);
    const double c = denom > 0.0 ? std::min(1.0, std::abs(acc) / denom) : 0.0;
    if (c > best.confidence) best = {d, c};
  }
  if (best.confidence < confidence_floor) throw NoPacketError(best.confidence, confidence_floor);
  return best;
}

double coarse_cfo(const ComplexSignal& preambles, const LoRaParams& params) {
  const std::size_t len = symbol_length(params);
  const std::size_t symbols = whole_symbols(preambles, len);
  if (symbols < 1)
    throw ShapeError("coarse CFO needs at least one symbol (" + std::to_string(len) + " samples), got " +
                     std::to_string(preambles.size()));
  const ComplexSignal used = preambles.slice(0, symbols * len);

  std::vector<cplx> ideal;
  const ComplexSignal chirp = basic_chirp(params);
  for (std::size_t k = 0; k < symbols; ++k) ideal.insert(ideal.end(), chirp.samples().begin(), chirp.samples().end());

  const double measured = mean(instantaneous_frequency(used));
  const double reference = mean(instantaneous_frequency(ComplexSignal(std::move(ideal), params.ts)));
  return measured - reference;
}

ComplexSignal compensate(const ComplexSignal& signal, double f) {
  if (f == 0.0) return signal;
  const double step = -2.0 * std::numbers::pi * f * signal.ts();
  const auto x = signal.samples();
  std::vector<cplx> out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) out[n] = x[n] * std::polar(1.0, step * static_cast<double>(n));
  return ComplexSignal(std::move(out), signal.ts());
}

double fine_cfo(const ComplexSignal& preambles, const LoRaParams& params) {
  const std::size_t len = symbol_length(params);
  const std::size_t symbols = whole_symbols(preambles, len);
  if (symbols < 2)
    throw ShapeError("fine CFO needs two whole symbols (" + std::to_string(2 * len) + " samples), got " +
                     std::to_string(preambles.size()));
  const auto r = preambles.samples();
  cplx acc{};
  for (std::size_t s = 0; s + 1 < symbols; ++s) {
    const std::size_t base = s * len;
    for (std::size_t n = 0; n < len; ++n) acc += r[base + n] * std::conj(r[base + len + n]);
  }
  double angle = std::arg(acc);
  // keep the estimate strictly inside the open resolvable interval
  if (std::abs(angle) >= std::numbers::pi) angle = std::copysign(std::nextafter(std::numbers::pi, 0.0), angle);
  return -angle / (2.0 * std::numbers::pi * preambles.ts() * static_cast<double>(len));
}

std::pair<ComplexSignal, CfoEstimate> estimate_and_compensate(const ComplexSignal& preambles,
                                                              const LoRaParams& params) {
  CfoEstimate est;
  est.coarse = coarse_cfo(preambles, params);
  ComplexSignal coarse_fixed = compensate(preambles, est.coarse);
  est.fine = fine_cfo(coarse_fixed, params);
  est.total = est.coarse + est.fine;
  return {compensate(coarse_fixed, est.fine), est};
}

ComplexSignal normalize(const ComplexSignal& signal) {
  double energy = 0.0;
  for (const cplx& s : signal.samples()) energy += std::norm(s);
  if (energy == 0.0) throw SignalError("cannot normalize an all-zero signal");
  const double rms = std::sqrt(energy / static_cast<double>(signal.size()));
  std::vector<cplx> out(signal.samples().begin(), signal.samples().end());
  for (cplx& s : out) s /= rms;
  return ComplexSignal(std::move(out), signal.ts());
}

}  // namespace lorafp
