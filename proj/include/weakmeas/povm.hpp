#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "weakmeas/errors.hpp"
#include "weakmeas/quadrature.hpp"
#include "weakmeas/qubit.hpp"
#include "weakmeas/rng.hpp"
#include "weakmeas/vec3.hpp"

namespace weakmeas {

/// One unsharp polarization measurement element of precision delta: a Gaussian
/// coefficient pair over the +/-1 eigenprojectors of the measured direction,
///   element = coeff_plus * P_plus + coeff_minus * P_minus,
/// with coeff_pm the Gaussian density of the outcome at the eigenvalues. The
/// log coefficients are carried alongside; every update ratio is formed in log
/// space so extreme outcomes or tiny delta never overflow.
struct GaussianPovmElement {
    Vec3 direction;
    double delta = 1.0;
    double sigma = 0.0;
    double coeff_plus = 0.0;
    double coeff_minus = 0.0;
    double log_coeff_plus = 0.0;
    double log_coeff_minus = 0.0;
};

inline GaussianPovmElement gaussian_povm_element(double sigma, const Vec3& direction, double delta) {
    if (!(delta > 0.0)) throw ValidationError("gaussian_povm_element: delta must be positive");
    if (!is_unit(direction)) throw ValidationError("gaussian_povm_element: direction must be a unit vector");
    GaussianPovmElement e;
    e.direction = direction;
    e.delta = delta;
    e.sigma = sigma;
    const double inv2d2 = 0.5 / (delta * delta);
    if (!std::isfinite(inv2d2) || !std::isfinite(sigma)) {
        throw NumericalError("gaussian_povm_element: delta^2 degenerates in double precision");
    }
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * delta * delta);
    e.log_coeff_plus = log_norm - (1.0 - sigma) * (1.0 - sigma) * inv2d2;
    e.log_coeff_minus = log_norm - (1.0 + sigma) * (1.0 + sigma) * inv2d2;
    e.coeff_plus = std::exp(e.log_coeff_plus);
    e.coeff_minus = std::exp(e.log_coeff_minus);
    return e;
}

/// Outcome density p(sigma) = coeff_plus * p_plus + coeff_minus * p_minus with
/// branch weights p_pm = (1 +/- n.s)/2. Integrates to 1 over sigma.
inline double outcome_pdf_bloch(const Vec3& s, const Vec3& direction, double delta, double sigma) {
    const auto e = gaussian_povm_element(sigma, direction, delta);
    const double sp = dot(s, direction);
    return e.coeff_plus * 0.5 * (1.0 + sp) + e.coeff_minus * 0.5 * (1.0 - sp);
}

inline double outcome_pdf(const QubitDensity& rho, const Vec3& direction, double delta, double sigma) {
    return outcome_pdf_bloch(density_to_bloch(rho), direction, delta, sigma);
}

/// log p(sigma), stable for outcomes far in the Gaussian tails.
inline double log_outcome_pdf_bloch(const Vec3& s, const Vec3& direction, double delta, double sigma) {
    const auto e = gaussian_povm_element(sigma, direction, delta);
    const double sp = std::clamp(dot(s, direction), -1.0, 1.0);
    const double a = e.log_coeff_plus + std::log(0.5 * (1.0 + sp));   // -inf at sp = -1
    const double b = e.log_coeff_minus + std::log(0.5 * (1.0 - sp));  // -inf at sp = +1
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Exact sampler for the outcome density: pick the +/-1 branch with the branch
/// weight, then add Gaussian noise of standard deviation delta.
inline double sample_outcome_bloch(const Vec3& s, const Vec3& direction, double delta, RandomStream& rng) {
    const double p_plus = 0.5 * (1.0 + dot(s, direction));
    const double branch = rng.uniform01() < p_plus ? 1.0 : -1.0;
    return branch + delta * rng.normal();
}

inline double sample_outcome(const QubitDensity& rho, const Vec3& direction, double delta, RandomStream& rng) {
    return sample_outcome_bloch(density_to_bloch(rho), direction, delta, rng);
}

/// Conditional state after the measurement (square-root update), in Bloch form.
///
/// Along the measured axis the update is a log-odds shift by u = sigma/delta^2;
/// the transverse part contracts by sqrt(coeff_plus coeff_minus)/trace. Both
/// are evaluated through a log-sum-exp so the projective limit (tiny delta,
/// |u| huge) lands exactly on the eigenprojector.
inline Vec3 posterior_update_bloch(const Vec3& s, double sigma, const Vec3& direction, double delta) {
    if (!(delta > 0.0)) throw ValidationError("posterior_update_bloch: delta must be positive");
    const double sp = std::clamp(dot(s, direction), -1.0, 1.0);
    const double u = sigma / (delta * delta);
    if (!std::isfinite(u)) throw NumericalError("posterior_update_bloch: outcome/delta^2 degenerates");
    const double a = u + std::log1p(sp);   // log of e^u (1 + sp)
    const double b = -u + std::log1p(-sp); // log of e^-u (1 - sp)
    const double m = std::max(a, b);
    const double wa = std::exp(a - m);
    const double wb = std::exp(b - m);
    const double sp_new = (wa - wb) / (wa + wb);
    const double perp_scale = 2.0 * std::exp(-m) / (wa + wb);
    const Vec3 perp = s - sp * direction;
    return clamp_bloch(sp_new * direction + perp_scale * perp);
}

inline QubitDensity posterior_update(const QubitDensity& rho, double sigma, const Vec3& direction, double delta) {
    return bloch_to_density(posterior_update_bloch(density_to_bloch(rho), sigma, direction, delta));
}

struct ProjectiveOutcome {
    int result = +1;  // +/-1
    Vec3 state;       // aposteriori pure state, Bloch form
};

/// Ideal projective measurement of the polarization along `direction`.
inline ProjectiveOutcome projective_posterior_bloch(const Vec3& s, const Vec3& direction, RandomStream& rng) {
    const double p_plus = 0.5 * (1.0 + dot(s, direction));
    if (rng.uniform01() < p_plus) return {+1, direction};
    return {-1, -direction};
}

inline ProjectiveOutcome projective_posterior(const QubitDensity& rho, const Vec3& direction, RandomStream& rng) {
    return projective_posterior_bloch(density_to_bloch(rho), direction, rng);
}

/// Normalized element, the record-only mixed estimate: Bloch vector
/// tanh(sigma/delta^2) along the measured direction.
inline QubitDensity mixed_estimate(const GaussianPovmElement& e) {
    return bloch_to_density(std::tanh(e.sigma / (e.delta * e.delta)) * e.direction);
}

enum class EstimateMode {
    EigenSample,   // eigenstate drawn with probability equal to its eigenvalue
    MostProbable,  // eigenstate of the larger eigenvalue
};

/// Refine a mixed estimate to a pure one (unit Bloch vector).
inline Vec3 pure_estimate(const QubitDensity& rho_prime, EstimateMode mode, RandomStream& rng) {
    const auto eig = eigensystem(rho_prime);
    if (mode == EstimateMode::MostProbable) return eig[0].state;
    return rng.uniform01() < eig[0].value ? eig[0].state : eig[1].state;
}

struct QuadratureSpec {
    std::size_t panels = 625;
    std::size_t points = 16;  // 10^4 nodes total by default
};

/// Max-norm residual of the resolution of identity: the element integrates to
/// the identity, so both eigen-coefficients must integrate to 1. The window
/// +/-12 delta beyond the eigenvalues leaves tail mass below 1e-30.
inline double completeness_residual(double delta, const QuadratureSpec& quad = {}) {
    if (!(delta > 0.0)) throw ValidationError("completeness_residual: delta must be positive");
    const auto rule = gauss_legendre(quad.points);
    const double lo = -1.0 - 12.0 * delta;
    const double hi = 1.0 + 12.0 * delta;
    const double inv2d2 = 0.5 / (delta * delta);
    const double nrm = 1.0 / std::sqrt(2.0 * std::numbers::pi * delta * delta);
    const double ip = integrate_composite(
        [&](double s) { return nrm * std::exp(-(1.0 - s) * (1.0 - s) * inv2d2); }, lo, hi, quad.panels, rule);
    const double im = integrate_composite(
        [&](double s) { return nrm * std::exp(-(1.0 + s) * (1.0 + s) * inv2d2); }, lo, hi, quad.panels, rule);
    return std::max(std::abs(ip - 1.0), std::abs(im - 1.0));
}

}  // namespace weakmeas
