#pragma once

// Fixed worker pool for index-parallel loops. Work items write only to their
// own slots, so results never depend on the worker count.

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sope {

class WorkerPool {
 public:
  // 0 or 1 workers: everything runs on the calling thread.
  explicit WorkerPool(int workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int workers() const { return static_cast<int>(threads_.size()); }

  // Calls fn(i) for i in [0, n). Rethrows the first exception by index.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void worker_loop();

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t next_ = 0;
  std::size_t total_ = 0;
  std::size_t finished_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::vector<std::exception_ptr> errors_;
};

// Worker count from SOPE_THREADS (0 = serial); defaults to the core count.
int threads_from_env();

}  // namespace sope
