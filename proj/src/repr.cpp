#include "lorafp/repr.hpp"

#include <cmath>

#include "lorafp/error.hpp"
#include "lorafp/fft.hpp"

namespace lorafp {

namespace {

void check_length(const ComplexSignal& s, std::size_t expected) {
  if (expected != 0 && s.size() != expected)
    throw ShapeError("representation expects " + std::to_string(expected) + " samples, got " +
                     std::to_string(s.size()));
}

RealMatrix split_rows(std::span<const cplx> v) {
  RealMatrix m(2, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    m(0, i) = v[i].real();
    m(1, i) = v[i].imag();
  }
  return m;
}

}  // namespace

Representation parse_representation(std::string_view name) {
  if (name == "iq") return Representation::iq;
  if (name == "fft") return Representation::fft;
  if (name == "spectrogram") return Representation::spectrogram;
  throw ConfigError("unknown representation '" + std::string(name) + "' (expected iq, fft or spectrogram)");
}

std::string to_string(Representation r) {
  switch (r) {
    case Representation::iq:
      return "iq";
    case Representation::fft:
      return "fft";
    case Representation::spectrogram:
      return "spectrogram";
  }
  return "?";
}

IqMatrix to_iq(const ComplexSignal& signal, std::size_t expected_length) {
  check_length(signal, expected_length);
  return {split_rows(signal.samples())};
}

FftMatrix to_fft(const ComplexSignal& signal, std::size_t expected_length) {
  check_length(signal, expected_length);
  const std::vector<cplx> bins = dft(signal.samples());
  return {split_rows(dc_center<cplx>(bins))};
}

std::size_t spectrogram_columns(std::size_t n, std::size_t window_len, std::size_t hop) {
  if (window_len == 0 || hop == 0) throw ConfigError("spectrogram window and hop must be positive");
  if (window_len > n)
    throw ShapeError("spectrogram window of " + std::to_string(window_len) + " exceeds signal length " +
                     std::to_string(n));
  return (n - window_len) / hop + 1;
}

RealMatrix stft_power(const ComplexSignal& signal, std::size_t window_len, std::size_t hop) {
  const std::size_t cols = spectrogram_columns(signal.size(), window_len, hop);
  RealMatrix out(window_len, cols);
  const auto x = signal.samples();
#pragma omp parallel for schedule(static)
  for (std::size_t m = 0; m < cols; ++m) {
    const std::vector<cplx> bins = dft(x.subspan(m * hop, window_len));
    for (std::size_t k = 0; k < window_len; ++k) out((k + window_len / 2) % window_len, m) = std::norm(bins[k]);
  }
  return out;
}

SpectrogramMatrix to_spectrogram(const ComplexSignal& signal, const SpectrogramConfig& cfg) {
  RealMatrix p = stft_power(signal, cfg.window_len, cfg.hop);
  for (double& v : p.data) v = 10.0 * std::log10(v + cfg.epsilon);
  if (cfg.standardize) {
    double mean = 0.0;
    for (double v : p.data) mean += v;
    mean /= static_cast<double>(p.data.size());
    double var = 0.0;
    for (double v : p.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(p.data.size());
    if (var > 0.0) {
      const double inv = 1.0 / std::sqrt(var);
      for (double& v : p.data) v = (v - mean) * inv;
    }
  }
  return {std::move(p)};
}

nn::Shape representation_shape(Representation kind, std::size_t n, const SpectrogramConfig& cfg) {
  switch (kind) {
    case Representation::iq:
    case Representation::fft:
      return {1, 2, static_cast<int>(n)};
    case Representation::spectrogram:
      return {1, static_cast<int>(cfg.window_len), static_cast<int>(spectrogram_columns(n, cfg.window_len, cfg.hop))};
  }
  throw ConfigError("unknown representation");
}

nn::Tensor<float> represent(const ComplexSignal& signal, Representation kind, const SpectrogramConfig& cfg) {
  RealMatrix m;
  switch (kind) {
    case Representation::iq:
      m = to_iq(signal).m;
      break;
    case Representation::fft:
      m = to_fft(signal).m;
      break;
    case Representation::spectrogram:
      m = to_spectrogram(signal, cfg).m;
      break;
  }
  nn::Tensor<float> t(1, {1, static_cast<int>(m.rows), static_cast<int>(m.cols)});
  for (std::size_t i = 0; i < m.data.size(); ++i) t.data[i] = static_cast<float>(m.data[i]);
  return t;
}

}  // namespace lorafp
