#include "lorafp/pipeline.hpp"

namespace lorafp {

namespace {

ComplexSignal locate(const ComplexSignal& received, const ChainOptions& o) {
  const std::size_t n = symbol_length(o.params) * static_cast<std::size_t>(o.params.n_preambles);
  if (!o.synchronize) return received.size() == n ? received : received.slice(0, n);
  const SyncResult s = synchronize(received, o.params, o.sync_floor);
  return received.slice(s.offset, n);
}

}  // namespace

ChainOutput run_chain(const ComplexSignal& received, const ChainOptions& options) {
  const ComplexSignal preambles = locate(received, options);
  auto [compensated, cfo] = estimate_and_compensate(preambles, options.params);
  const ComplexSignal unit = normalize(options.compensate ? compensated : preambles);
  ChainOutput out;
  const nn::Tensor<float> features = represent(unit, options.representation, options.spectrogram);
  out.features.assign(features.data.begin(), features.data.end());
  out.cfo = cfo;
  return out;
}

CfoEstimate estimate_cfo(const ComplexSignal& received, const ChainOptions& options) {
  return estimate_and_compensate(locate(received, options), options.params).second;
}

nn::Shape chain_shape(const ChainOptions& options) {
  const std::size_t n = symbol_length(options.params) * static_cast<std::size_t>(options.params.n_preambles);
  return representation_shape(options.representation, n, options.spectrogram);
}

}  // namespace lorafp
