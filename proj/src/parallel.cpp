#include "optfield/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace optfield {

namespace {

int g_threads = 0;

int env_threads() {
  if (const char* env = std::getenv("OPTFIELD_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return value;
  }
  return 0;
}

}  // namespace

void set_thread_count(int threads) { g_threads = std::max(threads, 0); }

int thread_count() {
  if (g_threads > 0) return g_threads;
  if (const int env = env_threads(); env > 0) return env;
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& body) {
  std::mutex mutex;
  std::ptrdiff_t failed_index = std::numeric_limits<std::ptrdiff_t>::max();
  std::exception_ptr failure;

#ifdef _OPENMP
  const int threads = thread_count();
#pragma omp parallel for schedule(static) num_threads(threads) if (n > 64 && threads > 1)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex);
      if (i < failed_index) {
        failed_index = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace optfield
