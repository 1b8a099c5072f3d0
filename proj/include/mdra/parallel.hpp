#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mdra {

namespace detail {

// Persistent worker pool. Workers are created on demand up to the largest
// count ever requested and parked between calls; one fan-out runs at a time.
// Tasks write results by index, so callers fold in index order and stay
// bit-stable regardless of the worker count.
class WorkerPool {
  public:
    static WorkerPool& instance() {
        static WorkerPool pool;
        return pool;
    }

    ~WorkerPool() {
        {
            std::unique_lock<std::mutex> lock(mutex_);
            shutdown_ = true;
        }
        wake_.notify_all();
        for (auto& t : workers_) t.join();
    }

    // Runs fn(i) for i in [0, count) on `threads` workers (including the
    // calling thread). Rethrows the first task exception.
    void run(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
        std::unique_lock<std::mutex> guard(run_mutex_);
        {
            std::unique_lock<std::mutex> lock(mutex_);
            ensure_workers(threads > 0 ? threads - 1 : 0, lock);
            fn_ = &fn;
            count_ = count;
            next_ = 0;
            active_ = 0;
            error_ = nullptr;
            ++generation_;
        }
        wake_.notify_all();
        work();  // the caller participates
        {
            std::unique_lock<std::mutex> lock(mutex_);
            done_.wait(lock, [&] { return active_ == 0; });
            fn_ = nullptr;
            if (error_) {
                auto err = error_;
                error_ = nullptr;
                std::rethrow_exception(err);
            }
        }
    }

  private:
    WorkerPool() = default;

    void ensure_workers(unsigned wanted, std::unique_lock<std::mutex>&) {
        while (workers_.size() < wanted)
            workers_.emplace_back([this, gen = generation_] { worker_loop(gen); });
    }

    void worker_loop(std::uint64_t seen) {
        for (;;) {
            {
                std::unique_lock<std::mutex> lock(mutex_);
                wake_.wait(lock, [&] { return shutdown_ || generation_ != seen; });
                if (shutdown_) return;
                seen = generation_;
            }
            work();
        }
    }

    void work() {
        {
            std::unique_lock<std::mutex> lock(mutex_);
            if (!fn_) return;
            ++active_;
        }
        for (;;) {
            const std::size_t i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= count_) break;
            try {
                (*fn_)(i);
            } catch (...) {
                std::unique_lock<std::mutex> lock(mutex_);
                if (!error_) error_ = std::current_exception();
                next_.store(count_, std::memory_order_relaxed);  // drain remaining work
            }
        }
        {
            std::unique_lock<std::mutex> lock(mutex_);
            if (--active_ == 0) done_.notify_all();
        }
    }

    std::mutex run_mutex_;  // serializes fan-outs
    std::mutex mutex_;
    std::condition_variable wake_, done_;
    std::vector<std::thread> workers_;
    const std::function<void(std::size_t)>* fn_ = nullptr;
    std::size_t count_ = 0;
    std::atomic<std::size_t> next_{0};
    unsigned active_ = 0;
    std::uint64_t generation_ = 0;
    std::exception_ptr error_;
    bool shutdown_ = false;
};

}  // namespace detail

// Runs fn(i) for every i in [0, n) on up to `threads` workers and returns the
// results indexed by i. Callers fold the returned vector in index order, so
// any reduction is bit-stable regardless of the thread count.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, unsigned threads, F&& fn) {
    std::vector<R> out(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    const std::function<void(std::size_t)> task = [&](std::size_t i) { out[i] = fn(i); };
    detail::WorkerPool::instance().run(n, threads, task);
    return out;
}

}  // namespace mdra
