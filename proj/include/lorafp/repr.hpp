#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lorafp/nn/tensor.hpp"
#include "lorafp/phy.hpp"

namespace lorafp {

/// Dense row-major real matrix.
struct RealMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Row 0 real parts, row 1 imaginary parts.
struct IqMatrix {
  RealMatrix m;
};

/// Real/imaginary rows of the DC-centered length-N DFT.
struct FftMatrix {
  RealMatrix m;
};

/// Frequency bins (DC-centered) x time columns.
struct SpectrogramMatrix {
  RealMatrix m;
};

struct SpectrogramConfig {
  std::size_t window_len = 256;
  std::size_t hop = 128;
  double epsilon = 1e-12;   ///< floor inside the logarithm
  bool standardize = true;  ///< zero mean / unit variance after compression (skipped if variance is 0)
};

enum class Representation { iq, fft, spectrogram };

Representation parse_representation(std::string_view name);
std::string to_string(Representation r);

/// expected_length == 0 skips the length check.
IqMatrix to_iq(const ComplexSignal& signal, std::size_t expected_length = 0);
FftMatrix to_fft(const ComplexSignal& signal, std::size_t expected_length = 0);

/// |STFT|^2 with a rectangular window, M x C, C = floor((N - M) / R) + 1. No compression.
RealMatrix stft_power(const ComplexSignal& signal, std::size_t window_len, std::size_t hop);

/// 10 log10(power + epsilon), then optional standardization.
SpectrogramMatrix to_spectrogram(const ComplexSignal& signal, const SpectrogramConfig& cfg = {});

std::size_t spectrogram_columns(std::size_t n, std::size_t window_len, std::size_t hop);

/// CNN input shape of a representation for signals of n samples.
nn::Shape representation_shape(Representation kind, std::size_t n, const SpectrogramConfig& cfg = {});

/// Single-precision CNN input (one channel) for the chosen representation.
nn::Tensor<float> represent(const ComplexSignal& signal, Representation kind, const SpectrogramConfig& cfg = {});

}  // namespace lorafp
