#include "workers.hpp"

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mvp {

int resolve_worker_count(int config_value) {
  if (const char* env = std::getenv("MVP_WORKERS")) {
    try {
      int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (...) {
      // fall through to config/default on malformed values
    }
  }
  if (config_value >= 1) return config_value;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<int>(std::min(hw, 8u));
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t w = std::min<std::size_t>(std::max(workers, 1), n);
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  std::exception_ptr first_error = nullptr;
  std::mutex err_mutex;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&, lo, hi]() {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace mvp
