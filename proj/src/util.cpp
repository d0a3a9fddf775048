#include "mdimlab/util.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace mdimlab {

namespace {
std::atomic<int> g_workers{1};
}

void set_worker_count(int n) {
  if (n < 1) throw std::invalid_argument("worker count must be >= 1");
  g_workers.store(n);
}

int worker_count() { return g_workers.load(); }

void parallel_for_index(std::size_t count, const std::function<void(std::size_t)>& fn) {
  int w = worker_count();
  if (w <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  // chunk boundaries depend on count alone; which worker runs a chunk
  // is schedule-dependent but harmless since slots are per-index
  const std::size_t chunk = 64;
  const std::size_t nchunks = (count + chunk - 1) / chunk;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto run = [&]() {
    for (;;) {
      std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= nchunks) return;
      std::size_t lo = c * chunk;
      std::size_t hi = std::min(count, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::size_t nthreads = std::min(static_cast<std::size_t>(w), nchunks);
  std::vector<std::thread> pool;
  pool.reserve(nthreads - 1);
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mdimlab
