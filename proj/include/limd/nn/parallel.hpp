#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

namespace limd::nn {

// Tiny fork-join pool for intra-sample layer parallelism: run(fn) executes
// fn(0..threads-1), tid 0 on the calling thread, and returns when all are
// done. Work partitions are fixed functions of (extent, threads), so results
// are bitwise deterministic for a given thread count.
class ParallelPool {
public:
    explicit ParallelPool(int threads) : threads_(threads < 1 ? 1 : threads) {
        if (threads_ > 1) states_ = std::make_unique<WorkerState[]>(size_t(threads_ - 1));
        for (int t = 1; t < threads_; ++t) {
            workers_.emplace_back([this, t] { worker_loop(t); });
        }
    }
    ~ParallelPool() {
        stop_.store(true, std::memory_order_release);
        epoch_.fetch_add(1, std::memory_order_release);
        for (auto& w : workers_) w.join();
    }

    int threads() const { return threads_; }

    void run(const std::function<void(int)>& fn) {
        if (threads_ == 1) {
            fn(0);
            return;
        }
        task_ = &fn;
        const uint64_t e = epoch_.fetch_add(1, std::memory_order_acq_rel) + 1;
        fn(0);
        for (int t = 0; t + 1 < threads_; ++t) {
            while (states_[size_t(t)].done.load(std::memory_order_acquire) < e) cpu_pause();
        }
        task_ = nullptr;
    }

    // [begin, end) slice of `total` items for `tid`, aligned to `unit`.
    static std::pair<int, int> slice(int total, int unit, int tid, int threads) {
        const int units = (total + unit - 1) / unit;
        const int per = units / threads;
        const int extra = units % threads;
        const int u0 = tid * per + std::min(tid, extra);
        const int u1 = u0 + per + (tid < extra ? 1 : 0);
        return {std::min(total, u0 * unit), std::min(total, u1 * unit)};
    }

private:
    struct alignas(64) WorkerState {
        std::atomic<uint64_t> done{0};
    };

    static void cpu_pause() {
#if defined(__x86_64__) || defined(__i386__)
        __builtin_ia32_pause();
#else
        std::this_thread::yield();
#endif
    }

    void worker_loop(int tid) {
        uint64_t seen = 0;
        while (true) {
            while (epoch_.load(std::memory_order_acquire) == seen) cpu_pause();
            seen = epoch_.load(std::memory_order_acquire);
            if (stop_.load(std::memory_order_acquire)) return;
            const std::function<void(int)>* f = task_;
            if (f) (*f)(tid);
            states_[size_t(tid - 1)].done.store(seen, std::memory_order_release);
        }
    }

    int threads_;
    std::vector<std::thread> workers_;
    std::unique_ptr<WorkerState[]> states_;
    const std::function<void(int)>* task_ = nullptr;
    std::atomic<uint64_t> epoch_{0};
    std::atomic<bool> stop_{false};
};

}  // namespace limd::nn
