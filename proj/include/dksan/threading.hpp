// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

#include <atomic>
#include <cstdlib>

namespace dksan {

namespace detail {
inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{0};  // 0 = uncapped
  return cap;
}
}  // namespace detail

/// Programmatic cap (the CLI's --threads); 0 removes the cap.
inline void set_thread_cap(int n) { detail::thread_cap().store(n < 0 ? 0 : n); }

/// Worker threads for every parallel region in the library:
/// min(OMP max threads, DKSAN_THREADS env var, programmatic cap).
inline int num_threads() {
#ifdef _OPENMP
  int nt = omp_get_max_threads();
  static const int env_cap = [] {
    if (const char* env = std::getenv("DKSAN_THREADS")) {
      const int c = std::atoi(env);
      if (c >= 1) return c;
    }
    return 0;
  }();
  if (env_cap >= 1 && env_cap < nt) nt = env_cap;
  const int cap = detail::thread_cap().load();
  if (cap >= 1 && cap < nt) nt = cap;
  return nt < 1 ? 1 : nt;
#else
  return 1;
#endif
}

}  // namespace dksan
