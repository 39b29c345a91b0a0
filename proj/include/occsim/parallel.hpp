#pragma once

#include <cstddef>
#include <functional>

namespace occsim {

/// Worker count: OCCSIM_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [begin, end) split into contiguous chunks across
/// workers. body must only write state owned by index i.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body);

}  // namespace occsim
