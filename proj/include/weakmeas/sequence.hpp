#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "weakmeas/errors.hpp"
#include "weakmeas/povm.hpp"
#include "weakmeas/qubit.hpp"
#include "weakmeas/rng.hpp"

namespace weakmeas {

/// Running product of measurement square-roots, kept at unit spectral norm
/// with the removed scale accumulated in log space. Raw products decay like
/// (2 pi delta^2)^(-n/4) and would underflow doubles near n ~ 700; the split
/// representation survives arbitrarily long sequences.
struct KrausAccumulator {
    Matrix2c op = Matrix2c::Identity();
    double log_weight = 0.0;
};

/// Largest singular value of a 2x2 matrix, closed form.
inline double spectral_norm_2x2(const Matrix2c& m) {
    const double t = m.squaredNorm();                 // sum of both squared singular values
    const double d = std::abs(m.determinant());      // product of the singular values
    const double disc = std::max(0.0, t * t - 4.0 * d * d);
    return std::sqrt(0.5 * (t + std::sqrt(disc)));
}

/// Left-multiply the accumulated product by the square root of `element`.
inline KrausAccumulator kraus_extend(const KrausAccumulator& acc, const GaussianPovmElement& element) {
    const double lmax = std::max(element.log_coeff_plus, element.log_coeff_minus);
    const double a = std::exp(0.5 * (element.log_coeff_plus - lmax));
    const double b = std::exp(0.5 * (element.log_coeff_minus - lmax));
    // sqrt(element)/exp(lmax/2) = ((a+b) I + (a-b) n.sigma)/2
    const Matrix2c root =
        0.5 * ((a + b) * Matrix2c::Identity() + (a - b) * pauli_dot(element.direction));
    KrausAccumulator out;
    out.op = root * acc.op;
    const double s = spectral_norm_2x2(out.op);
    if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("kraus_extend: degenerate operator norm");
    out.op /= s;
    out.log_weight = acc.log_weight + 0.5 * lmax + std::log(s);
    return out;
}

/// element / tr element for a single measurement lives in povm.hpp; this is
/// the sequence-level mixed estimate op^dag op / tr (the scale factor cancels).
inline QubitDensity mixed_estimate(const KrausAccumulator& acc) {
    const Matrix2c m = acc.op.adjoint() * acc.op;
    const double tr = m.trace().real();
    if (!(tr > 0.0)) throw NumericalError("mixed_estimate: zero-trace accumulator");
    QubitDensity q;
    q.mat = m / tr;
    return q;
}

struct DirectionPolicy {
    enum class Kind { FreshRandom, Fixed };
    Kind kind = Kind::FreshRandom;
    Vec3 axis{0.0, 0.0, 1.0};

    static DirectionPolicy fresh_random() { return {}; }
    static DirectionPolicy fixed(const Vec3& axis) {
        if (!is_unit(axis)) throw ValidationError("DirectionPolicy::fixed: axis must be a unit vector");
        return {Kind::Fixed, axis};
    }
};

/// Which running state the outcome is drawn from: the true conditional state,
/// or the record-conditioned state that starts from the maximally mixed one.
enum class SamplingSource { TrueState, Hypothetical };

struct StepRecord {
    Vec3 direction;
    double outcome = 0.0;
};

struct SequenceResult {
    std::vector<StepRecord> steps;
    QubitDensity posterior;               // conditional state of the true apriori
    QubitDensity hypothetical_posterior;  // conditional state of a maximally mixed start
    QubitDensity mixed_estimate;          // normalized accumulated element
    double log_probability_density = 0.0;
};

/// State visible to the per-step observer of run_sequence_steps.
struct SequenceStepView {
    std::size_t step = 0;  // 1-based
    const Vec3& true_state;
    const Vec3& hypo_state;
    const KrausAccumulator& accumulator;
    double log_probability_density;
    const StepRecord& record;
};

/// Core sequential-measurement loop. Each step draws a direction per `policy`,
/// draws the outcome from the one-step conditional density of the
/// `source` state, and advances the true posterior, the maximally-mixed-start
/// posterior and the Kraus product. The accumulated log density is the chain
/// product of the one-step conditional densities of the sampled source.
template <typename OnStep>
void run_sequence_steps(const Vec3& apriori, std::size_t n, double delta, const DirectionPolicy& policy,
                        SamplingSource source, RandomStream& rng, OnStep&& on_step) {
    if (!(delta > 0.0)) throw ValidationError("run_sequence_steps: delta must be positive");
    if (norm(apriori) > 1.0 + kBlochInputTol) {
        throw ValidationError("run_sequence_steps: apriori Bloch vector leaves the unit ball");
    }
    Vec3 s_true = apriori;
    Vec3 s_hypo{0.0, 0.0, 0.0};
    KrausAccumulator acc;
    double log_pdf = 0.0;
    StepRecord rec;
    for (std::size_t k = 1; k <= n; ++k) {
        rec.direction = policy.kind == DirectionPolicy::Kind::FreshRandom ? sample_uniform_sphere(rng) : policy.axis;
        const Vec3& sampled = source == SamplingSource::TrueState ? s_true : s_hypo;
        rec.outcome = sample_outcome_bloch(sampled, rec.direction, delta, rng);
        log_pdf += log_outcome_pdf_bloch(sampled, rec.direction, delta, rec.outcome);
        const auto element = gaussian_povm_element(rec.outcome, rec.direction, delta);
        s_true = posterior_update_bloch(s_true, rec.outcome, rec.direction, delta);
        s_hypo = posterior_update_bloch(s_hypo, rec.outcome, rec.direction, delta);
        acc = kraus_extend(acc, element);
        on_step(SequenceStepView{k, s_true, s_hypo, acc, log_pdf, rec});
    }
}

inline SequenceResult run_sequence(const QubitDensity& apriori, std::size_t n, double delta,
                                   const DirectionPolicy& policy, SamplingSource source, RandomStream& rng) {
    SequenceResult result;
    result.steps.reserve(n);
    result.posterior = QubitDensity{apriori.mat};
    result.hypothetical_posterior = maximally_mixed();
    KrausAccumulator final_acc;
    run_sequence_steps(density_to_bloch(apriori), n, delta, policy, source, rng, [&](const SequenceStepView& v) {
        result.steps.push_back(v.record);
        if (v.step == n) {
            result.posterior = bloch_to_density(v.true_state);
            result.hypothetical_posterior = bloch_to_density(v.hypo_state);
            result.log_probability_density = v.log_probability_density;
            final_acc = v.accumulator;
        }
    });
    result.mixed_estimate = n == 0 ? maximally_mixed() : mixed_estimate(final_acc);
    return result;
}

}  // namespace weakmeas
