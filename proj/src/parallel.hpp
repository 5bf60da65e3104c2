#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ace/netcore.hpp"

namespace ace::detail {

/// Worker count: explicit request, else ACE_THREADS, else hardware threads.
inline unsigned worker_count(unsigned requested, Index jobs) {
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("ACE_THREADS")) {
      try {
        n = static_cast<unsigned>(std::max(1, std::stoi(env)));
      } catch (...) {
        n = 1;
      }
    } else {
      n = std::max(1u, std::thread::hardware_concurrency());
    }
  }
  return static_cast<unsigned>(std::clamp<Index>(static_cast<Index>(n), 1, std::max<Index>(1, jobs)));
}

/// Runs body(j) for j in [0, jobs). Each job writes only its own slot; the
/// first exception is rethrown after all workers stop.
template <typename Body>
void parallel_for(Index jobs, unsigned requested_threads, Body&& body) {
  const unsigned workers = worker_count(requested_threads, jobs);
  if (workers <= 1) {
    for (Index j = 0; j < jobs; ++j) body(j);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index j = next++; j < jobs; j = next++) {
        try {
          body(j);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = jobs;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ace::detail
