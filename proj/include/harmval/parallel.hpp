#pragma once

#include <cstdint>

// Data-parallel loop helper. Every kernel built on this writes one output
// slot per index and merges in index order, so results are identical
// whether the loop runs on one thread or many. force_serial() switches the
// reference path on at runtime; tests and the benchmark tool use it.

namespace harmval {

inline bool& force_serial_flag() {
  static bool v = false;
  return v;
}
inline void set_force_serial(bool on) { force_serial_flag() = on; }
inline bool force_serial() { return force_serial_flag(); }

namespace detail {
#if defined(_OPENMP)
constexpr bool kHaveOpenMP = true;
#else
constexpr bool kHaveOpenMP = false;
#endif
}

template <typename F>
void parallel_for(std::int64_t n, F&& body) {
  if (n <= 0) return;
#if defined(_OPENMP)
  if (!force_serial()) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace harmval
