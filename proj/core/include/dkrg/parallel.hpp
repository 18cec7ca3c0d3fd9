#pragma once

#include <cstddef>
#include <functional>

namespace dkrg {

/// Worker count from DKRG_THREADS. 0 (or 1) means strict single-threaded
/// execution; unset means std::thread::hardware_concurrency().
int thread_count();

/// Overrides the environment for the current process (tests, CLI flags).
/// A negative value restores the environment lookup.
void set_thread_count(int threads);

bool strict_mode();

/// Runs body(i) for i in [0, n). Work items must write to disjoint outputs;
/// callers reduce per-item results in index order so that results do not
/// depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dkrg
