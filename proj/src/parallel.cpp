#include "divkit/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace divkit {
namespace {

int initial_threads() {
  if (const char* env = std::getenv("DIVKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::atomic<int>& thread_bound() {
  static std::atomic<int> bound{initial_threads()};
  return bound;
}

}  // namespace

int max_threads() { return thread_bound().load(std::memory_order_relaxed); }

void set_max_threads(int n) { thread_bound().store(n < 1 ? 1 : n, std::memory_order_relaxed); }

}  // namespace divkit
