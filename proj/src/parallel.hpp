#pragma once

#include <cstddef>
#include <exception>

namespace fairalloc::detail {

// OpenMP loop over [0, n) that carries the first exception out of the
// parallel region instead of terminating.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(fairalloc_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace fairalloc::detail
