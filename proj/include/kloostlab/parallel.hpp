#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kloostlab {

// Resolve a thread-count request: 0 means "use the hardware", anything else
// is taken literally (and clamped to at least 1).
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Run fn(chunk_index) for chunk_index in [0, n_chunks) on up to `threads`
// workers. Each invocation must write only to its own output slot; the caller
// combines slots in index order afterwards, so results do not depend on the
// worker count.
template <typename Fn>
void parallel_chunks(std::uint64_t n_chunks, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads == 1 || n_chunks <= 1) {
        for (std::uint64_t i = 0; i < n_chunks; ++i) fn(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_chunks || failed.load(std::memory_order_relaxed)) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned n_workers = static_cast<unsigned>(threads);
    if (n_chunks < n_workers) n_workers = static_cast<unsigned>(n_chunks);
    pool.reserve(n_workers);
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace kloostlab
