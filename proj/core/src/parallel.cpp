#include "dkrg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace dkrg {
namespace {

std::atomic<int> g_override{-1};

int env_threads() {
  const char* raw = std::getenv("DKRG_THREADS");
  if (raw == nullptr || *raw == '\0') {
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  try {
    return std::max(0, std::stoi(raw));
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

int thread_count() {
  const int forced = g_override.load();
  return forced >= 0 ? forced : env_threads();
}

void set_thread_count(int threads) { g_override.store(threads); }

bool strict_mode() { return thread_count() <= 1; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, thread_count())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dkrg
