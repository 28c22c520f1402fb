#pragma once

#include <span>
#include <vector>

#include "lorafp/phy.hpp"

namespace lorafp {

/// Forward DFT X[k] = sum_n x[n] exp(-j 2 pi k n / N), unnormalized. Any N >= 1.
std::vector<cplx> dft(std::span<const cplx> x);

/// Moves bin 0 to index N/2 (integer division) so frequencies run negative to positive.
template <typename T>
std::vector<T> dc_center(std::span<const T> bins) {
  const std::size_t n = bins.size();
  std::vector<T> out(n);
  for (std::size_t k = 0; k < n; ++k) out[(k + n / 2) % n] = bins[k];
  return out;
}

}  // namespace lorafp
