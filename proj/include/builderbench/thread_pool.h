#ifndef BUILDERBENCH_THREAD_POOL_H_
#define BUILDERBENCH_THREAD_POOL_H_

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace builderbench {

// Fixed set of worker threads that run index-parallel loops. The calling
// thread takes part in every loop, so a pool of size 1 runs inline.
class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  // Calls fn(i) for i in [0, count). Blocks until all calls return. The
  // first exception thrown by any call is rethrown here.
  void ParallelFor(size_t count, const std::function<void(size_t)>& fn);

 private:
  void WorkerLoop();
  void RunChunks();

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(size_t)>* job_ = nullptr;
  size_t count_ = 0;
  size_t next_ = 0;
  int active_ = 0;
  unsigned generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

// Thread count from BB_THREADS, else hardware concurrency (at least 1).
int DefaultThreadCount();

}  // namespace builderbench

#endif  // BUILDERBENCH_THREAD_POOL_H_
