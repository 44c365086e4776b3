#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <vector>

#ifdef ALTREC_WITH_OPENMP
#include <omp.h>
#endif

namespace altrec {

/// Number of worker threads used by the parallel loops below.
inline int thread_count() {
#ifdef ALTREC_WITH_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_thread_count(int n) {
#ifdef ALTREC_WITH_OPENMP
  if (n > 0)
    omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs.
/// An exception thrown by any iteration is rethrown after the loop; if
/// several throw, the one from the lowest index wins.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
#ifdef ALTREC_WITH_OPENMP
  std::exception_ptr error;
  std::size_t error_index = n;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(altrec_parallel_for_error)
      if (static_cast<std::size_t>(i) < error_index) {
        error_index = static_cast<std::size_t>(i);
        error = std::current_exception();
      }
    }
  }
  if (error)
    std::rethrow_exception(error);
#else
  for (std::size_t i = 0; i < n; ++i)
    body(i);
#endif
}

/// Sum of term(i) over [0, n). The range is cut into a fixed number of
/// blocks independent of the thread count and the block sums are added in
/// order, so the result is bit-identical for any number of threads.
template <class Term>
double deterministic_sum(std::size_t n, Term&& term) {
  constexpr std::size_t kBlocks = 256;
  if (n < 4 * kBlocks) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += term(i);
    return s;
  }
  std::vector<double> partial(kBlocks, 0.0);
  parallel_for(kBlocks, [&](std::size_t b) {
    const std::size_t lo = n * b / kBlocks;
    const std::size_t hi = n * (b + 1) / kBlocks;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
      s += term(i);
    partial[b] = s;
  });
  double s = 0.0;
  for (double p : partial)
    s += p;
  return s;
}

} // namespace altrec
