#pragma once

#include <cstddef>
#include <utility>

#include "lorafp/phy.hpp"

namespace lorafp {

struct CfoEstimate {
  double coarse = 0.0;  ///< [Hz]
  double fine = 0.0;    ///< [Hz], |fine| < bw / 2^(sf+1)
  double total = 0.0;   ///< coarse + fine
};

struct SyncResult {
  std::size_t offset = 0;   ///< first sample of the preamble
  double confidence = 0.0;  ///< normalized correlation peak in [0, 1]
};

inline constexpr double kDefaultSyncFloor = 0.5;

/// Normalized cross-correlation against one ideal basic chirp over every start that leaves room for the
/// full preamble. Throws NoPacketError when the peak is below confidence_floor.
/// For packets carrying a frequency offset the peak moves by about -cfo * T / bw samples (chirp
/// time/frequency coupling), and a pre-aligned packet with a large offset correlates poorly at lag 0.
SyncResult synchronize(const ComplexSignal& signal, const LoRaParams& params,
                       double confidence_floor = kDefaultSyncFloor);

/// Frequency offset from the mean instantaneous frequency of whole preamble symbols. The mean of the
/// same discriminator over the ideal preamble is subtracted, so the result estimates the offset directly.
double coarse_cfo(const ComplexSignal& preambles, const LoRaParams& params);

/// x[n] exp(-j 2 pi f n ts).
ComplexSignal compensate(const ComplexSignal& signal, double f);

/// Residual offset from the phase of the correlation between adjacent preamble symbols, summed over
/// every adjacent pair. Result lies strictly inside (-bw/2^(sf+1), bw/2^(sf+1)).
double fine_cfo(const ComplexSignal& preambles, const LoRaParams& params);

/// Coarse estimate, coarse compensation, fine estimate, fine compensation.
std::pair<ComplexSignal, CfoEstimate> estimate_and_compensate(const ComplexSignal& preambles, const LoRaParams& params);

/// Divides by the RMS amplitude. Throws SignalError on an all-zero signal.
ComplexSignal normalize(const ComplexSignal& signal);

}  // namespace lorafp
