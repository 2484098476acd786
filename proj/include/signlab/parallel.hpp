#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace signlab {

enum class Execution { serial, parallel };

namespace detail {

template <typename Fn>
void for_each_run_serial(std::size_t count, Fn&& fn) {
  for (std::size_t i = 0; i < count; ++i) fn(i);
}

template <typename Fn>
void for_each_run_omp(std::size_t count, Fn&& fn) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// Runs fn(i) for i in [0, count). Each call must write only to slot i of
// whatever output it owns, so results do not depend on the schedule.
template <typename Fn>
void for_each_run(std::size_t count, Execution exec, Fn&& fn) {
  if (exec == Execution::serial) {
    detail::for_each_run_serial(count, fn);
  } else {
    detail::for_each_run_omp(count, fn);
  }
}

}  // namespace signlab
