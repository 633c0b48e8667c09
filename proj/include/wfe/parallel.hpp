#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wfe {

/// Worker count from WFE_THREADS; unset or invalid means 1 (serial).
inline int thread_count() {
  const char* env = std::getenv("WFE_THREADS");
  if (!env) return 1;
  try {
    const int n = std::stoi(env);
    if (n == 0) return std::max(1u, std::thread::hardware_concurrency());
    return n > 0 ? n : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

/// Runs job(i) for i in [0, n). Each job writes only its own slot, so results
/// do not depend on scheduling. The first exception is rethrown after all
/// workers stop.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& job, int threads = thread_count()) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// splitmix64 finalizer; mixes a base seed with job keys into a stream seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t job_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = mix_seed(base);
  for (auto k : keys) s = mix_seed(s ^ k);
  return s;
}

}  // namespace wfe
