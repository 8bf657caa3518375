#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#define SEDLOSS_OMP_PRAGMA(content) _Pragma(content)
#else
#define SEDLOSS_OMP_PRAGMA(content)
#endif

namespace sedloss::parallel {

inline int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) noexcept {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Reductions are split into fixed-size blocks whose partial sums are combined
/// in block order, so the result depends only on the input, never on the
/// thread count or schedule.
inline constexpr std::size_t kReduceBlock = 4096;

/// Sums term(i) for i in [0, count) with the block-ordered scheme above.
/// term must be safe to call concurrently for distinct i.
template <typename Term>
double block_sum(std::size_t count, Term&& term) {
  const std::size_t blocks = (count + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<long long>(blocks);
  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(static)")
  for (long long b = 0; b < nb; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(count, lo + kReduceBlock);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    partial[static_cast<std::size_t>(b)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace sedloss::parallel
