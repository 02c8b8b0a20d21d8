#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

namespace weakmeas {

/// Streaming count/mean/M2 accumulator with an exact pooled merge.
///
/// merge() orders its two operands canonically before combining, so it is
/// bitwise commutative; ensembles combine leaf summaries in a fixed pairwise
/// tree (see parallel.hpp), which makes every reported statistic independent
/// of the worker count.
struct RunSummary {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;  // sum of squared deviations from the mean

    void add(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double standard_error() const {
        return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
    }
};

inline RunSummary merge_summaries(const RunSummary& a, const RunSummary& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    auto key = [](const RunSummary& s) {
        return std::make_tuple(s.count, std::bit_cast<std::uint64_t>(s.mean), std::bit_cast<std::uint64_t>(s.m2));
    };
    const RunSummary& lo = key(a) <= key(b) ? a : b;
    const RunSummary& hi = key(a) <= key(b) ? b : a;
    RunSummary out;
    out.count = lo.count + hi.count;
    const double d = hi.mean - lo.mean;
    const double nl = static_cast<double>(lo.count);
    const double nh = static_cast<double>(hi.count);
    const double n = static_cast<double>(out.count);
    out.mean = lo.mean + d * (nh / n);
    out.m2 = lo.m2 + hi.m2 + d * d * (nl * nh / n);
    return out;
}

/// Fold a sequence of summaries pairwise (fixed balanced tree over the input
/// order); deterministic regardless of how the inputs were produced.
inline RunSummary reduce_pairwise(std::vector<RunSummary> items) {
    if (items.empty()) return {};
    while (items.size() > 1) {
        std::size_t out = 0;
        for (std::size_t i = 0; i + 1 < items.size(); i += 2) {
            items[out++] = merge_summaries(items[i], items[i + 1]);
        }
        if (items.size() % 2 == 1) items[out++] = items.back();
        items.resize(out);
    }
    return items[0];
}

}  // namespace weakmeas
