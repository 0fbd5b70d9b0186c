#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace thnse {

/// Worker cap from THNSE_THREADS (default 1; values < 1 are ignored).
inline int worker_count()
{
  const char* env = std::getenv("THNSE_THREADS");
  if (env == nullptr)
    return 1;
  try {
    return std::max(1, std::stoi(env));
  } catch (const std::exception&) {
    return 1;
  }
}

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Callers write
/// per-index results and reduce them afterwards in index order, so the
/// outcome does not depend on the thread count.
template <class Fn>
void parallel_for(int n, Fn&& fn)
{
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers)
          fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool)
    t.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace thnse
