#pragma once

#include <cstddef>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fga {

// Runs fn(i) for i in [0, n). Work items write to disjoint slots, so results
// do not depend on the worker count. The exception from the lowest failing
// index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::exception_ptr error;
  std::size_t error_index = std::numeric_limits<std::size_t>::max();
  const long count = static_cast<long>(n);
#ifdef _OPENMP
  const int workers = threads > 0 ? threads : 1;
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (workers > 1)
#endif
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(fga_parallel_for_error)
#endif
      {
        if (static_cast<std::size_t>(i) < error_index) {
          error_index = static_cast<std::size_t>(i);
          error = std::current_exception();
        }
      }
    }
  }
  (void)threads;
  if (error) std::rethrow_exception(error);
}

}  // namespace fga
