#include "splatsim/parallel.hpp"

namespace splatsim {

ThreadPool::ThreadPool(unsigned workers) {
    if (workers == 0) {
        workers = std::thread::hardware_concurrency();
        if (workers == 0) workers = 1;
    }
    workers_ = workers;
    threads_.reserve(workers_ > 1 ? workers_ : 0);
    // Worker 0 is the calling thread; only spawn the rest.
    for (unsigned w = 1; w < workers_; ++w) {
        threads_.emplace_back([this, w] { worker_loop(w); });
    }
}

ThreadPool::~ThreadPool() {
    {
        std::unique_lock<std::mutex> lk(mu_);
        stop_ = true;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
}

void ThreadPool::worker_loop(unsigned self) {
    unsigned long long seen = 0;
    for (;;) {
        const std::function<void(std::size_t, std::size_t)>* job;
        std::size_t n;
        {
            std::unique_lock<std::mutex> lk(mu_);
            cv_start_.wait(lk, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            job = job_;
            n = job_n_;
        }
        std::size_t b = n * self / workers_;
        std::size_t e = n * (self + 1) / workers_;
        try {
            if (b < e) (*job)(b, e);
        } catch (...) {
            std::unique_lock<std::mutex> lk(mu_);
            if (!first_error_) first_error_ = std::current_exception();
        }
        {
            std::unique_lock<std::mutex> lk(mu_);
            if (--pending_ == 0) cv_done_.notify_one();
        }
    }
}

void ThreadPool::parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (workers_ == 1) {
        fn(0, n);
        return;
    }
    {
        std::unique_lock<std::mutex> lk(mu_);
        job_ = &fn;
        job_n_ = n;
        first_error_ = nullptr;
        pending_ = workers_ - 1;
        ++generation_;
    }
    cv_start_.notify_all();
    // Caller executes chunk 0.
    std::exception_ptr own_error;
    std::size_t e0 = n / workers_;
    try {
        if (e0 > 0) fn(0, e0);
    } catch (...) {
        own_error = std::current_exception();
    }
    {
        std::unique_lock<std::mutex> lk(mu_);
        cv_done_.wait(lk, [&] { return pending_ == 0; });
        job_ = nullptr;
    }
    if (own_error) std::rethrow_exception(own_error);
    if (first_error_) std::rethrow_exception(first_error_);
}

void ThreadPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    parallel_ranges(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

} // namespace splatsim
