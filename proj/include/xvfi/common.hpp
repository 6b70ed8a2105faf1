#pragma once

// Shared error types and the threading primitive used by every kernel.
// Parallelism is fork-join over disjoint index ranges: each index is
// computed by exactly one thread and no reduction crosses a thread
// boundary, so results never depend on the thread count.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace xvfi {

// Raised when tensor/flow shapes are inconsistent with an operation.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised for out-of-domain scalar arguments (t outside [0,1], bad factors...).
class ValueError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a file cannot be opened/read/written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised for malformed file contents (bad magic, truncation, bad header).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised for weight-store problems: missing/duplicate/unknown layers, shape
// mismatches, incompatible hyperparams.
class WeightError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::atomic<int>& thread_cap_slot() {
    static std::atomic<int> cap{-1};  // -1 = not yet resolved from env
    return cap;
}

}  // namespace detail

// Caps worker threads. 0 means "use hardware concurrency". Overrides the
// XVFI_THREADS environment variable; tests use this to prove thread-count
// invariance without re-execing.
inline void set_thread_cap(int n) {
    if (n < 0) throw ValueError("set_thread_cap: cap must be >= 0, got " + std::to_string(n));
    detail::thread_cap_slot().store(n == 0 ? -2 : n);  // -2 = explicit auto
}

// Effective thread count: set_thread_cap() if called, else XVFI_THREADS,
// else hardware concurrency. Always >= 1.
inline int thread_count() {
    int cap = detail::thread_cap_slot().load();
    if (cap == -1) {
        int resolved = -2;
        if (const char* env = std::getenv("XVFI_THREADS")) {
            char* end = nullptr;
            long v = std::strtol(env, &end, 10);
            if (end && *end == '\0' && v > 0) resolved = static_cast<int>(v);
        }
        detail::thread_cap_slot().store(resolved);
        cap = resolved;
    }
    if (cap == -2) {
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }
    return cap;
}

// Runs fn(i) for i in [0, n). Each index runs exactly once on exactly one
// thread; chunk boundaries cannot affect results because iterations are
// independent by contract. min_per_thread keeps tiny workloads serial.
template <typename Fn>
void parallel_for(std::int64_t n, std::int64_t min_per_thread, Fn&& fn) {
    if (n <= 0) return;
    std::int64_t want = n / std::max<std::int64_t>(1, min_per_thread);
    int threads = static_cast<int>(std::min<std::int64_t>(thread_count(), std::max<std::int64_t>(1, want)));
    if (threads <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        std::int64_t lo = n * t / threads;
        std::int64_t hi = n * (t + 1) / threads;
        pool.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace xvfi
