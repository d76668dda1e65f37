#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace divkit {

/// Current worker-thread bound (>= 1). Initialized from DIVKIT_THREADS if
/// set, otherwise the OpenMP default.
int max_threads();

/// Overrides the thread bound; values < 1 clamp to 1.
void set_max_threads(int n);

/// Static-schedule parallel loop over [0, n). Callers must write only to
/// per-index slots: every result in this codebase is assembled from disjoint
/// writes and reduced serially afterwards, which keeps outputs byte-identical
/// for any thread count.
template <class F>
void parallel_for(std::size_t n, F&& f) {
#ifdef _OPENMP
  const int threads = max_threads();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      f(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace divkit
