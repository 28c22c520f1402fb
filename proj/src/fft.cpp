#include "lorafp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "lorafp/error.hpp"

namespace lorafp {

namespace {

// The FFTW planner is not thread-safe; execution of an existing plan on new arrays is.
class PlanCache {
 public:
  fftw_plan forward(int n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> scratch_in(static_cast<std::size_t>(n)), scratch_out(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(scratch_in.data()),
                                   reinterpret_cast<fftw_complex*>(scratch_out.data()), FFTW_FORWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw std::runtime_error("FFTW could not plan a transform of size " + std::to_string(n));
    plans_.emplace(n, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<int, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

std::vector<cplx> dft(std::span<const cplx> x) {
  if (x.empty()) throw ShapeError("DFT of an empty sequence");
  const int n = static_cast<int>(x.size());
  std::vector<cplx> in(x.begin(), x.end());
  std::vector<cplx> out(x.size());
  fftw_execute_dft(plan_cache().forward(n), reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace lorafp
