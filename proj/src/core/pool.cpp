#include "sope/pool.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace sope {

WorkerPool::WorkerPool(int workers) {
  if (workers <= 1) return;
  for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lk(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [&] { return stop_ || (generation_ != seen && next_ < total_); });
    if (stop_) return;
    while (next_ < total_) {
      const std::size_t i = next_++;
      const auto* job = job_;
      lk.unlock();
      try {
        (*job)(i);
      } catch (...) {
        std::lock_guard<std::mutex> elk(mu_);
        errors_[i] = std::current_exception();
      }
      lk.lock();
      if (++finished_ == total_) done_cv_.notify_all();
    }
    seen = generation_;
  }
}

void WorkerPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads_.empty()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::unique_lock<std::mutex> lk(mu_);
  errors_.assign(n, nullptr);
  job_ = &fn;
  next_ = 0;
  total_ = n;
  finished_ = 0;
  ++generation_;
  cv_.notify_all();
  done_cv_.wait(lk, [&] { return finished_ == total_; });
  job_ = nullptr;
  total_ = 0;
  for (auto& e : errors_) {
    if (e) std::rethrow_exception(e);
  }
}

int threads_from_env() {
  if (const char* s = std::getenv("SOPE_THREADS")) {
    try {
      return std::max(0, std::stoi(s));
    } catch (...) {
      return 0;
    }
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace sope
