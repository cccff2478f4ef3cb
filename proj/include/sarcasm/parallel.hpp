#ifndef SARCASM_PARALLEL_HPP
#define SARCASM_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace sarcasm {

// Runs fn(0) ... fn(n-1) on up to `jobs` threads with a static stride.
// Callers must write results only to per-index slots; under that contract
// the outcome is identical for any job count. The first exception thrown by
// a worker is rethrown after all threads join.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace sarcasm

#endif
