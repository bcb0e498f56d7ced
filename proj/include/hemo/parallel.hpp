#pragma once

#include <cstddef>
#include <functional>

namespace hemo {

// Caps the number of worker threads used by parallel_for (0 = hardware).
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs body(i) for i in [0, n). Work items must be independent; results are
// identical for any thread count as long as each item derives its own seed.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hemo
