#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace splatsim {

/// Persistent worker pool with statically partitioned parallel_for.
///
/// Work is split into exactly `worker_count()` contiguous chunks, so the set
/// of iterations each worker executes depends only on the range and the pool
/// size, never on scheduling. Callers that need thread-count-independent
/// results must make per-iteration writes disjoint (every stage in this
/// project does).
class ThreadPool {
public:
    explicit ThreadPool(unsigned workers = 0); // 0 -> hardware_concurrency
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    unsigned worker_count() const { return workers_; }

    /// Runs fn(begin, end) on each worker's chunk of [0, n). Blocks until all
    /// chunks finish. Exceptions from workers are rethrown on the caller.
    void parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

    /// Runs fn(i) for i in [0, n), chunked as in parallel_ranges.
    void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

private:
    void worker_loop(unsigned self);

    unsigned workers_;
    std::vector<std::thread> threads_;

    std::mutex mu_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
    std::size_t job_n_ = 0;
    unsigned long long generation_ = 0;
    unsigned pending_ = 0;
    bool stop_ = false;
    std::exception_ptr first_error_;
};

/// Pool plus execution flags threaded through the pipeline stages.
struct ExecContext {
    ThreadPool* pool = nullptr; // null -> serial
    bool deterministic = true;  // false permits atomic-scatter fast paths

    unsigned workers() const { return pool ? pool->worker_count() : 1; }

    void parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) const {
        if (pool && pool->worker_count() > 1) {
            pool->parallel_ranges(n, fn);
        } else if (n > 0) {
            fn(0, n);
        }
    }

    void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) const {
        parallel_ranges(n, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) fn(i);
        });
    }
};

} // namespace splatsim
