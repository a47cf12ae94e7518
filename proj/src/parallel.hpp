#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace docloop::detail {

// Calls fn(i) for i in [0, n) on at most hardware_concurrency threads.
// Exceptions are captured per index; the caller decides what to do with them.
template <class Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t n, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  auto body = [&]() {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  return errors;
}

}  // namespace docloop::detail
