// Execution policy for the data-parallel kernels. Every kernel keeps a plain
// serial loop as the reference path; the OpenMP path must produce identical
// results because per-item work never shares generator state.
#pragma once

#include <cstddef>
#include <cstdint>

namespace cutplane {

enum class Exec { serial, omp };

template <class Fn>
void for_each_index(Exec exec, std::size_t n, Fn&& fn) {
  const auto count = static_cast<std::int64_t>(n);
  if (exec == Exec::omp) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
  } else {
    for (std::int64_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
  }
}

}  // namespace cutplane
