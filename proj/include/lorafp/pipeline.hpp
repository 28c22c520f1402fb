#pragma once

#include <vector>

#include "lorafp/phy.hpp"
#include "lorafp/receiver.hpp"
#include "lorafp/repr.hpp"

namespace lorafp {

/// Receiver chain settings shared by training, evaluation and CFO reporting.
struct ChainOptions {
  LoRaParams params;
  bool compensate = true;
  Representation representation = Representation::spectrogram;
  SpectrogramConfig spectrogram;
  /// Search for the preamble start; only needed when packets carry leading noise.
  bool synchronize = false;
  double sync_floor = kDefaultSyncFloor;
};

struct ChainOutput {
  std::vector<float> features;  ///< representation_shape(...).size() values
  CfoEstimate cfo;
};

/// Optional sync, CFO estimation (always), optional compensation, RMS normalization, representation.
ChainOutput run_chain(const ComplexSignal& received, const ChainOptions& options);

/// Sync and CFO estimation only.
CfoEstimate estimate_cfo(const ComplexSignal& received, const ChainOptions& options);

/// CNN input shape produced by run_chain.
nn::Shape chain_shape(const ChainOptions& options);

}  // namespace lorafp
