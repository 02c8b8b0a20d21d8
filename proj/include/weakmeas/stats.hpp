#pragma once

#include <cmath>
#include <cstdint>

#include "weakmeas/errors.hpp"
#include "weakmeas/parallel.hpp"
#include "weakmeas/povm.hpp"
#include "weakmeas/rng.hpp"
#include "weakmeas/sequence.hpp"
#include "weakmeas/summary.hpp"

namespace weakmeas {

enum class FidelityMethod {
    Direct,       // sample the true outcome law, score the refined estimate
    Hypothetical, // sample the record-only law, score from the conditioned state
    Sequence,     // sequential-record purity mapped to fidelity
    Projective,   // ideal projective baseline
};

struct FidelityEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    FidelityMethod method = FidelityMethod::Direct;
    std::uint64_t samples = 0;
};

/// Drift-only solution of the purity equation from s2 = 0:
///   s2(t) = (e^{8t} - 1)/(e^{8t} - 1/3),
/// evaluated via e^{-8t} so large times saturate to 1 without overflow.
inline double drift_purity(double t) {
    if (!(t >= 0.0)) throw ValidationError("drift_purity: t must be non-negative");
    const double e = std::exp(-8.0 * t);
    return (1.0 - e) / (1.0 - e / 3.0);
}

/// Dimensionless time assigned to n measurements of precision delta.
inline double measurement_time(std::uint64_t n, double delta) {
    if (!(delta > 0.0)) throw ValidationError("measurement_time: delta must be positive");
    return 12.0 * static_cast<double>(n) / (delta * delta);
}

/// Closed-form average-fidelity curve 1/2 + drift_purity(t(n))/6; 1/2 at n = 0,
/// saturating to 2/3.
inline double saturation_value(std::uint64_t n, double delta) {
    return 0.5 + drift_purity(measurement_time(n, delta)) / 6.0;
}

namespace detail {

template <typename PerSample>
FidelityEstimate mc_fidelity(std::uint64_t samples, const RandomStream& base, unsigned workers,
                             FidelityMethod method, PerSample&& per_sample) {
    if (samples == 0) throw ValidationError("fidelity estimate: samples must be >= 1");
    auto cells = ensemble_summaries(static_cast<std::size_t>(samples), 1, workers,
                                    [&](std::size_t i, std::span<double> out) {
                                        RandomStream rs = base.substream(i);
                                        out[0] = per_sample(rs);
                                    });
    FidelityEstimate est;
    est.value = cells[0].mean;
    est.standard_error = cells[0].standard_error();
    est.method = method;
    est.samples = cells[0].count;
    return est;
}

}  // namespace detail

/// Projective baseline: random pure state, random axis, ideal measurement,
/// estimate = aposteriori state. Averages to 2/3.
inline FidelityEstimate avg_fidelity_projective(std::uint64_t samples, const RandomStream& base,
                                                unsigned workers = 1) {
    return detail::mc_fidelity(samples, base, workers, FidelityMethod::Projective, [](RandomStream& rs) {
        const Vec3 apriori = sample_uniform_sphere(rs);
        const Vec3 axis = sample_uniform_sphere(rs);
        const auto out = projective_posterior_bloch(apriori, axis, rs);
        return 0.5 * (1.0 + dot(apriori, out.state));
    });
}

/// Average fidelity of estimating a random pure state from one unsharp
/// measurement. Direct: draw the outcome from the true state's law and score
/// tr[estimate * apriori] with the eigen-sampled pure estimate. Hypothetical:
/// draw the outcome from the record-only law (maximally mixed input) and score
/// 2 (tr[conditioned * apriori])^2. Both average to the same value.
inline FidelityEstimate avg_fidelity_single(double delta, FidelityMethod method, std::uint64_t samples,
                                            const RandomStream& base, unsigned workers = 1,
                                            EstimateMode mode = EstimateMode::EigenSample) {
    if (!(delta > 0.0)) throw ValidationError("avg_fidelity_single: delta must be positive");
    if (method == FidelityMethod::Direct) {
        return detail::mc_fidelity(samples, base, workers, method, [=](RandomStream& rs) {
            const Vec3 apriori = sample_uniform_sphere(rs);
            const Vec3 axis = sample_uniform_sphere(rs);
            const double sigma = sample_outcome_bloch(apriori, axis, delta, rs);
            const auto element = gaussian_povm_element(sigma, axis, delta);
            const Vec3 estimate = pure_estimate(mixed_estimate(element), mode, rs);
            return 0.5 * (1.0 + dot(apriori, estimate));
        });
    }
    if (method != FidelityMethod::Hypothetical) {
        throw ValidationError("avg_fidelity_single: method must be Direct or Hypothetical");
    }
    return detail::mc_fidelity(samples, base, workers, method, [=](RandomStream& rs) {
        const Vec3 apriori = sample_uniform_sphere(rs);
        const Vec3 axis = sample_uniform_sphere(rs);
        const double sigma = sample_outcome_bloch({0.0, 0.0, 0.0}, axis, delta, rs);
        const Vec3 conditioned = posterior_update_bloch({0.0, 0.0, 0.0}, sigma, axis, delta);
        const double overlap = 0.5 * (1.0 + dot(conditioned, apriori));
        return 2.0 * overlap * overlap;
    });
}

/// Average fidelity after n sequential unsharp measurements of a random pure
/// state: (1 + E purity of the record-conditioned state)/3, with outcomes
/// drawn from the record-only law (maximally mixed start, fresh random axes).
inline FidelityEstimate avg_fidelity_sequence(std::uint64_t n, double delta, std::uint64_t trajectories,
                                              const RandomStream& base, unsigned workers = 1) {
    if (!(delta > 0.0)) throw ValidationError("avg_fidelity_sequence: delta must be positive");
    if (trajectories == 0) throw ValidationError("avg_fidelity_sequence: trajectories must be >= 1");
    auto cells = ensemble_summaries(static_cast<std::size_t>(trajectories), 1, workers,
                                    [&](std::size_t i, std::span<double> out) {
                                        RandomStream rs = base.substream(i);
                                        double last = 0.5;  // purity of the maximally mixed start
                                        run_sequence_steps({0.0, 0.0, 0.0}, n, delta, DirectionPolicy::fresh_random(),
                                                           SamplingSource::Hypothetical, rs,
                                                           [&](const SequenceStepView& v) {
                                                               if (v.step == n)
                                                                   last = 0.5 * (1.0 + norm2(v.hypo_state));
                                                           });
                                        out[0] = last;
                                    });
    FidelityEstimate est;
    est.value = (1.0 + cells[0].mean) / 3.0;
    est.standard_error = cells[0].standard_error() / 3.0;
    est.method = FidelityMethod::Sequence;
    est.samples = cells[0].count;
    return est;
}

}  // namespace weakmeas
