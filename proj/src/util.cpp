#include "pwlsf/util.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pwlsf {

namespace {

unsigned worker_count(Index n) {
  unsigned w = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("PWLSF_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) w = static_cast<unsigned>(v);
  }
  if (w < 1) w = 1;
  if (static_cast<Index>(w) > n) w = static_cast<unsigned>(n);
  return w;
}

}  // namespace

void parallel_for(Index n, const std::function<void(Index)>& fn) {
  if (n <= 0) return;
  const unsigned workers = worker_count(n);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    while (true) {
      const Index i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pwlsf
