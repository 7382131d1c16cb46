#ifndef DTREG_PARALLEL_HPP
#define DTREG_PARALLEL_HPP

#include <atomic>
#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace dtreg::par {

inline std::atomic<int>& thread_count_storage() {
    static std::atomic<int> count{0}; // 0 = use hardware concurrency
    return count;
}

inline int thread_count() {
    int c = thread_count_storage().load(std::memory_order_relaxed);
    if (c <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        c = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return c;
}

inline void set_thread_count(int n) {
    thread_count_storage().store(n, std::memory_order_relaxed);
}

// Runs fn(begin, end) over chunks of [0, n). Writes must be disjoint per
// index; results are then independent of the thread count. Work items small
// enough to not amortize thread spawn run inline.
template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn, std::int64_t grain = 1 << 12) {
    if (n <= 0) return;
    const int threads = std::min<std::int64_t>(thread_count(), (n + grain - 1) / grain);
    if (threads <= 1) {
        fn(std::int64_t{0}, n);
        return;
    }
    const std::int64_t chunks = (n + grain - 1) / grain;
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= chunks || failed.load(std::memory_order_relaxed)) return;
            const std::int64_t b = c * grain;
            const std::int64_t e = std::min(b + grain, n);
            try {
                fn(b, e);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads - 1));
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failed.load()) std::rethrow_exception(error);
}

namespace detail {

// Pairwise reduction over a partials array; tree shape depends only on the
// element count, never on scheduling.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = v[0];
        for (std::size_t i = 1; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

constexpr std::int64_t kSumBlock = 1 << 12;

} // namespace detail

// Sum of eval(i) for i in [0, n). Fixed block decomposition plus a fixed
// pairwise tree over block partials: bitwise identical for any thread count.
template <class Eval>
double deterministic_sum(std::int64_t n, Eval&& eval) {
    if (n <= 0) return 0.0;
    const std::int64_t nb = (n + detail::kSumBlock - 1) / detail::kSumBlock;
    std::vector<double> partial(static_cast<std::size_t>(nb), 0.0);
    parallel_for(
        n,
        [&](std::int64_t b, std::int64_t e) {
            // [b, e) is block-aligned because grain == kSumBlock
            for (std::int64_t blk = b / detail::kSumBlock; blk * detail::kSumBlock < e; ++blk) {
                const std::int64_t lo = blk * detail::kSumBlock;
                const std::int64_t hi = std::min(lo + detail::kSumBlock, n);
                double s = 0.0;
                for (std::int64_t i = lo; i < hi; ++i) s += eval(i);
                partial[static_cast<std::size_t>(blk)] = s;
            }
        },
        detail::kSumBlock);
    return detail::pairwise_sum(partial.data(), partial.size());
}

// Deterministic dot product of two equally sized ranges.
inline double deterministic_dot(const double* a, const double* b, std::int64_t n) {
    return deterministic_sum(n, [&](std::int64_t i) { return a[i] * b[i]; });
}

} // namespace dtreg::par

#endif
