#pragma once

#include <omp.h>

#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

namespace shm::par {

/// Worker count from an explicit request, else SHM_WORKERS, else 1.
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SHM_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

/// Reference implementation: evaluates fn(0..n-1) in order.
template <class Fn>
auto serial_map(int n, Fn&& fn) -> std::vector<decltype(fn(0))> {
  std::vector<decltype(fn(0))> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(fn(i));
  return out;
}

/// OpenMP fan-out of independent items. Results land at their own index,
/// so the output equals serial_map for any worker count. The exception of
/// the lowest failing index is rethrown after the region.
template <class Fn>
auto parallel_map(int n, int workers, Fn&& fn) -> std::vector<decltype(fn(0))> {
  using T = decltype(fn(0));
  if (workers <= 1 || n <= 1) return serial_map(n, fn);
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (int i = 0; i < n; ++i) {
    try {
      out[i] = fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace shm::par
