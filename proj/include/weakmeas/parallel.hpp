#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "weakmeas/errors.hpp"
#include "weakmeas/summary.hpp"

namespace weakmeas {

/// Items are accumulated in fixed contiguous leaves of this size and the
/// leaves are merged in a fixed pairwise tree, so results are bit-identical
/// for any worker count. Changing this constant changes emitted bytes.
inline constexpr std::size_t kReductionLeafSize = 256;

/// Run `fill(item_index, out_values)` for item_index in [0, items) and return
/// one pooled RunSummary per observable. Workers claim whole leaves; within a
/// leaf items run in ascending index order on one thread.
template <typename Fill>
std::vector<RunSummary> ensemble_summaries(std::size_t items, std::size_t n_obs, unsigned workers, Fill&& fill) {
    const std::size_t n_leaves = items == 0 ? 0 : (items + kReductionLeafSize - 1) / kReductionLeafSize;
    std::vector<std::vector<RunSummary>> leaves(n_leaves, std::vector<RunSummary>(n_obs));
    if (n_leaves > 0) {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            std::vector<double> values(n_obs);
            for (;;) {
                const std::size_t leaf = next.fetch_add(1);
                if (leaf >= n_leaves) return;
                const std::size_t begin = leaf * kReductionLeafSize;
                const std::size_t end = std::min(items, begin + kReductionLeafSize);
                try {
                    for (std::size_t i = begin; i < end; ++i) {
                        fill(i, std::span<double>(values));
                        for (std::size_t k = 0; k < n_obs; ++k) leaves[leaf][k].add(values[k]);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        unsigned n_threads = workers == 0 ? 1 : workers;
        n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_leaves));
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(n_threads);
            for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        if (first_error) std::rethrow_exception(first_error);
    }
    std::vector<RunSummary> result(n_obs);
    std::vector<RunSummary> column(n_leaves);
    for (std::size_t k = 0; k < n_obs; ++k) {
        for (std::size_t leaf = 0; leaf < n_leaves; ++leaf) column[leaf] = leaves[leaf][k];
        result[k] = reduce_pairwise(column);
    }
    return result;
}

}  // namespace weakmeas
