#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace optfield {

/// Caps the number of worker threads used by estimators. Zero restores the
/// default (OPTFIELD_THREADS if set, otherwise the runtime's choice).
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, n). Work items must not share mutable state.
/// If any item throws, the exception from the lowest failing index is
/// rethrown after the loop; results never depend on the thread count.
void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& body);

}  // namespace optfield
