#ifndef KAMTORI_KERNELS_HPP
#define KAMTORI_KERNELS_HPP

// Hot loops of the engine, each in two flavours: a plain serial reference
// and an OpenMP version. The serial versions are the ground truth the tests
// compare against; the parallel ones are what the library dispatches to when
// more than one thread is available.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

#include "kamtori/series.hpp"

namespace kamtori::kernels {

/// Number of OpenMP threads the dispatching entry points use (1 without OpenMP).
int thread_count();
void set_thread_count(int n);

// ---------------------------------------------------------------- convolution

/// Series product split into the part inside (d_cap, K_cap), accumulated into
/// `kept`, and the discarded part, accumulated into `tail`. `tail` must have
/// caps of at least (a.d_max + b.d_max, a.k_max + b.k_max).
void convolve_serial(const Series& a, const Series& b, int d_cap, int K_cap, Series& kept,
                     Series& tail);
void convolve_parallel(const Series& a, const Series& b, int d_cap, int K_cap, Series& kept,
                       Series& tail);
void convolve(const Series& a, const Series& b, int d_cap, int K_cap, Series& kept, Series& tail);

// ---------------------------------------------------------------- sieve

/// For each of `count` frequency vectors (row-major, `n` entries each) marks
/// whether some mode in `modes` violates |<k, w>| > gamma / |k|_1^tau.
void sieve_mask_serial(std::span<const double> omegas, int n, std::span<const Mode> modes,
                       double gamma, double tau, std::span<std::uint8_t> excluded);
void sieve_mask_parallel(std::span<const double> omegas, int n, std::span<const Mode> modes,
                         double gamma, double tau, std::span<std::uint8_t> excluded);

// ---------------------------------------------------------------- index loops

/// Runs f(i) for i in [0, count). Exceptions thrown by f are rethrown on the
/// calling thread (the first one wins).
template <class F>
void for_each_index_serial(std::size_t count, F&& f) {
  for (std::size_t i = 0; i < count; ++i) f(i);
}

template <class F>
void for_each_index_parallel(std::size_t count, F&& f) {
  std::exception_ptr failure;
  std::mutex guard;
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

template <class F>
void for_each_index(std::size_t count, F&& f) {
  if (thread_count() > 1 && count > 1) {
    for_each_index_parallel(count, std::forward<F>(f));
  } else {
    for_each_index_serial(count, std::forward<F>(f));
  }
}

}  // namespace kamtori::kernels

#endif  // KAMTORI_KERNELS_HPP
