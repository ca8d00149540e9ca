#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace semicone {

inline int& thread_cap() {
  static int cap = [] {
    if (const char* env = std::getenv("SEMICONE_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }();
  return cap;
}

inline void set_thread_cap(int n) { thread_cap() = std::max(1, n); }

// Fixed chunking and an ordered join: results are identical for any worker
// count, so parallel sweeps stay reproducible.
inline void parallel_for(long n, const std::function<void(long, long)>& body) {
  const int workers = std::min<long>(thread_cap(), std::max<long>(1, n));
  if (workers <= 1 || n < 4096) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long lo = w * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

// deterministic parallel reduction: each chunk accumulates into its own slot
template <class T>
T parallel_reduce(long n, T init, const std::function<T(long, long)>& chunk_fn,
                  const std::function<T(T, T)>& combine) {
  const int workers = std::min<long>(thread_cap(), std::max<long>(1, n));
  if (workers <= 1 || n < 4096) return combine(init, chunk_fn(0, n));
  const long chunk = (n + workers - 1) / workers;
  std::vector<T> slots;
  std::vector<std::thread> pool;
  const int used = static_cast<int>((n + chunk - 1) / chunk);
  slots.resize(used, init);
  for (int w = 0; w < used; ++w) {
    const long lo = w * chunk;
    const long hi = std::min(n, lo + chunk);
    pool.emplace_back([&slots, &chunk_fn, w, lo, hi] { slots[w] = chunk_fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
  T acc = init;
  for (const auto& s : slots) acc = combine(acc, s);
  return acc;
}

}  // namespace semicone
