#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "weakmeas/errors.hpp"
#include "weakmeas/parallel.hpp"
#include "weakmeas/qubit.hpp"
#include "weakmeas/rng.hpp"
#include "weakmeas/summary.hpp"
#include "weakmeas/vec3.hpp"

namespace weakmeas {

/// Euler-Maruyama configuration in the dimensionless time of the continuum
/// limit. Noise increments dW have variance dt per component.
struct SdeConfig {
    double dt = 1e-4;
    double t_end = 1.5;
    std::size_t record_stride = 1;

    std::size_t step_count() const {
        validate();
        return static_cast<std::size_t>(std::llround(t_end / dt));
    }

    void validate() const {
        if (!(dt > 0.0) || dt > 1e-2) throw ValidationError("SdeConfig: dt must be in (0, 1e-2]");
        if (!(t_end > 0.0)) throw ValidationError("SdeConfig: t_end must be positive");
        const double steps = t_end / dt;
        if (std::abs(steps - std::llround(steps)) > 1e-6 * std::max(1.0, steps)) {
            throw ValidationError("SdeConfig: t_end/dt must be an integer within rounding");
        }
        if (record_stride == 0) throw ValidationError("SdeConfig: record_stride must be >= 1");
    }
};

/// Isotropic noise increment: three iid Gaussians of variance dt. One
/// increment drives every equation coupled at a given step.
inline Vec3 noise_increment(RandomStream& rng, double dt) { return rng.normal3(std::sqrt(dt)); }

/// The Euler chain wanders off the unit sphere by O(dt) per step near the
/// boundary (that noise is intrinsic to the scheme, not a fault), so state
/// checks only catch genuine blow-ups.
inline constexpr double kBlochAbortNorm2 = 4.0;

inline void check_sde_state(const Vec3& s, const char* where) {
    if (!is_finite(s) || norm2(s) > kBlochAbortNorm2) {
        throw NumericalError(std::string(where) + ": state left the trust region (step size too coarse)");
    }
}

/// One Euler step of the conditional polarization equation:
///   ds = -4 s dt - 2 (s.dW) s + 2 dW.
inline Vec3 step_bloch(const Vec3& s, double dt, const Vec3& dW) {
    const Vec3 out = s + (-4.0 * dt) * s + 2.0 * dW - (2.0 * dot(s, dW)) * s;
    check_sde_state(out, "step_bloch");
    return out;
}

/// One Euler step of the squared-norm (purity) equation:
///   d s2 = 4 (3 - s2)(1 - s2) dt + 4 (1 - s2) sqrt(s2) dw,
/// clamped to [0, 1]; dw is the scalar projection of the isotropic noise.
inline double step_purity(double s2, double dt, double dw) {
    if (!(s2 >= 0.0) || s2 > 1.0) throw ValidationError("step_purity: s2 must lie in [0, 1]");
    const double out = s2 + 4.0 * (3.0 - s2) * (1.0 - s2) * dt + 4.0 * (1.0 - s2) * std::sqrt(s2) * dw;
    if (!std::isfinite(out)) throw NumericalError("step_purity: non-finite state");
    return std::clamp(out, 0.0, 1.0);
}

/// One Euler step of the conditional master equation in matrix form:
///   drho = -1/2 sum_i [sigma_i, [sigma_i, rho]] dt
///          + sum_i {sigma_i - <sigma_i>, rho} dW_i,
/// followed by trace renormalization. Pathwise identical (to rounding) to
/// step_bloch on the extracted polarization vector.
inline QubitDensity step_density(const QubitDensity& rho, double dt, const Vec3& dW) {
    const Vec3 m = density_to_bloch(rho);
    Matrix2c next = rho.mat;
    const double w[3] = {dW.x, dW.y, dW.z};
    const double mv[3] = {m.x, m.y, m.z};
    for (int i = 0; i < 3; ++i) {
        const Matrix2c& p = pauli(i);
        const Matrix2c c1 = p * rho.mat - rho.mat * p;
        next += (-0.5 * dt) * (p * c1 - c1 * p);
        const Matrix2c centered = p - mv[i] * Matrix2c::Identity();
        next += w[i] * (centered * rho.mat + rho.mat * centered);
    }
    const double tr = next.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) throw NumericalError("step_density: non-positive trace");
    QubitDensity out;
    out.mat = next / tr;
    check_sde_state(density_to_bloch(out), "step_density");
    return out;
}

/// Readout increment sharing the state step's noise: s dt + dW/2.
inline Vec3 readout_increment(const Vec3& s, const Vec3& dW, double dt) { return s * dt + 0.5 * dW; }

/// sum_i (sigma_i - c_i)^2 = (3 + |c|^2) I - 2 c.sigma, exact Pauli algebra.
inline Matrix2c centered_square(const Vec3& c) {
    return (3.0 + norm2(c)) * Matrix2c::Identity() - 2.0 * pauli_dot(c);
}

/// Normalized propagator pair: g rebuilds the conditional state of the true
/// apriori (rho_t = g rho g^dag), g_prime rebuilds both record-only states
/// (rho'_t = g'^dag g' / 2, hypothetical rho?_t = g' g'^dag / 2). The cached
/// means are the polarization expectations of rho_t and rho?_t.
struct PropagatorPair {
    Matrix2c g = Matrix2c::Identity();
    Matrix2c g_prime = Matrix2c::Identity();
    Vec3 true_mean;
    Vec3 hypo_mean;
};

inline PropagatorPair initial_propagators(const QubitDensity& apriori) {
    PropagatorPair p;
    p.true_mean = density_to_bloch(apriori);
    p.hypo_mean = {0.0, 0.0, 0.0};
    return p;
}

struct ReconstructedStates {
    QubitDensity rho;        // g rho_0 g^dag
    QubitDensity rho_prime;  // g'^dag g' / 2
    QubitDensity rho_hypo;   // g' g'^dag / 2
};

inline ReconstructedStates reconstruct_states(const PropagatorPair& p, const QubitDensity& apriori) {
    ReconstructedStates r;
    r.rho.mat = p.g * apriori.mat * p.g.adjoint();
    r.rho_prime.mat = 0.5 * (p.g_prime.adjoint() * p.g_prime);
    r.rho_hypo.mat = 0.5 * (p.g_prime * p.g_prime.adjoint());
    return r;
}

struct PropagatorStep {
    PropagatorPair pair;
    // Unit-trace drift of the raw Euler step, before renormalization; its
    // per-step fluctuation is O(dt) with mean O(dt^2).
    double trace_drift_true = 0.0;
    double trace_drift_hypo = 0.0;
};

/// One Euler step of the coupled propagator equations
///   dg  = [-1/2 |sigma - m|^2 dt + (sigma - m).dW] g
///   dg' = [(-|sigma - m|^2 + 1/2 |sigma - m?|^2 + |m - m?|^2) dt
///          + (sigma - m?).dW] g'
/// with m, m? the cached means; both operators are renormalized each step and
/// the means are recomputed from the reconstructed states.
inline PropagatorStep step_propagators(const PropagatorPair& p, const QubitDensity& apriori, double dt,
                                       const Vec3& dW) {
    const Vec3& m = p.true_mean;
    const Vec3& mq = p.hypo_mean;
    const Matrix2c noise_true = pauli_dot(dW) - dot(m, dW) * Matrix2c::Identity();
    const Matrix2c noise_hypo = pauli_dot(dW) - dot(mq, dW) * Matrix2c::Identity();
    const Matrix2c factor_g = (-0.5 * dt) * centered_square(m) + noise_true;
    const Matrix2c factor_gp =
        dt * (-centered_square(m) + 0.5 * centered_square(mq) + norm2(m - mq) * Matrix2c::Identity()) + noise_hypo;

    PropagatorStep out;
    out.pair.g = p.g + factor_g * p.g;
    out.pair.g_prime = p.g_prime + factor_gp * p.g_prime;

    const double tr_true = (out.pair.g * apriori.mat * out.pair.g.adjoint()).trace().real();
    const double tr_hypo = 0.5 * (out.pair.g_prime * out.pair.g_prime.adjoint()).trace().real();
    out.trace_drift_true = tr_true - 1.0;
    out.trace_drift_hypo = tr_hypo - 1.0;
    const double drift_cap = 100.0 * dt;
    if (!std::isfinite(tr_true) || !std::isfinite(tr_hypo) || std::abs(out.trace_drift_true) > drift_cap ||
        std::abs(out.trace_drift_hypo) > drift_cap) {
        throw NumericalError("step_propagators: normalization drift exceeds the scheme trust bound");
    }
    out.pair.g /= std::sqrt(tr_true);
    out.pair.g_prime /= std::sqrt(tr_hypo);

    const auto states = reconstruct_states(out.pair, apriori);
    out.pair.true_mean = density_to_bloch(states.rho);
    out.pair.hypo_mean = density_to_bloch(states.rho_hypo);
    return out;
}

// ---------------------------------------------------------------------------
// Ensemble integration

struct BlochStart {
    Vec3 s;
};
struct PurityStart {
    double s2 = 0.0;
};
struct DensityStart {
    QubitDensity rho;
};
struct PropagatorStart {
    QubitDensity apriori;
};

/// The initial condition selects the equation being integrated.
using SdeInitial = std::variant<BlochStart, PurityStart, DensityStart, PropagatorStart>;

/// Per-observable, per-record-time pooled statistics of an ensemble.
struct EnsembleSeries {
    std::vector<double> times;
    std::vector<std::string> observables;
    std::vector<RunSummary> cells;  // [observable][time], row-major by observable

    const RunSummary& at(std::size_t obs, std::size_t time_index) const {
        return cells[obs * times.size() + time_index];
    }
    std::size_t observable_index(const std::string& name) const {
        for (std::size_t i = 0; i < observables.size(); ++i) {
            if (observables[i] == name) return i;
        }
        throw ValidationError("EnsembleSeries: unknown observable " + name);
    }
};

namespace detail {

inline std::vector<std::size_t> record_steps(std::size_t steps, std::size_t stride) {
    std::vector<std::size_t> rec;
    for (std::size_t k = 0; k <= steps; k += stride) rec.push_back(k);
    if (rec.back() != steps) rec.push_back(steps);
    return rec;
}

template <typename State, typename Advance, typename Observe>
void run_recorded_path(State state, const std::vector<std::size_t>& rec, std::size_t steps, Advance&& advance,
                       Observe&& observe, std::span<double> out, std::size_t n_obs) {
    std::size_t r = 0;
    if (rec[r] == 0) {
        observe(state, out.subspan(0, n_obs));
        ++r;
    }
    for (std::size_t k = 1; k <= steps; ++k) {
        advance(state);
        if (r < rec.size() && rec[r] == k) {
            observe(state, out.subspan(r * n_obs, n_obs));
            ++r;
        }
    }
}

}  // namespace detail

/// Integrate an ensemble of independent trajectories of the selected equation
/// and return streaming statistics of its observables at every recorded time.
/// Trajectory i uses substream i of `base`; results are deterministic in
/// (master seed, stream index) and independent of `workers`.
///
/// Observables: Bloch/Density {sx, sy, sz, s2}; Purity {s2}; Propagators
/// {tr_rho, tr_rho_prime, tr_rho_q, bloch_dev_vs_direct, s2_hypo}, where the
/// deviation is measured against a direct master-equation chain driven by the
/// same noise path.
inline EnsembleSeries integrate_paths(const SdeConfig& config, const SdeInitial& initial, std::size_t ensemble,
                                      const RandomStream& base, unsigned workers = 1) {
    config.validate();
    const std::size_t steps = config.step_count();
    const auto rec = detail::record_steps(steps, config.record_stride);
    const double dt = config.dt;
    const double sqrt_dt = std::sqrt(dt);

    EnsembleSeries series;
    series.times.reserve(rec.size());
    for (const std::size_t k : rec) series.times.push_back(static_cast<double>(k) * dt);

    // Trajectories fill time-major scratch; cells are stored observable-major.
    auto fill_with = [&](auto&& per_traj, std::size_t n_obs) {
        auto raw = ensemble_summaries(ensemble, n_obs * rec.size(), workers,
                                      [&](std::size_t i, std::span<double> out) {
                                          RandomStream rs = base.substream(i);
                                          try {
                                              per_traj(rs, out);
                                          } catch (const NumericalError& e) {
                                              throw NumericalError(std::string(e.what()) + " (trajectory " +
                                                                   std::to_string(i) + ")");
                                          }
                                      });
        std::vector<RunSummary> cells(raw.size());
        for (std::size_t t = 0; t < rec.size(); ++t) {
            for (std::size_t k = 0; k < n_obs; ++k) cells[k * rec.size() + t] = raw[t * n_obs + k];
        }
        return cells;
    };

    if (const auto* start = std::get_if<BlochStart>(&initial)) {
        series.observables = {"sx", "sy", "sz", "s2"};
        series.cells = fill_with(
            [&](RandomStream& rs, std::span<double> out) {
                detail::run_recorded_path(
                    start->s, rec, steps, [&](Vec3& s) { s = step_bloch(s, dt, noise_increment(rs, dt)); },
                    [&](const Vec3& s, std::span<double> o) {
                        o[0] = s.x;
                        o[1] = s.y;
                        o[2] = s.z;
                        o[3] = norm2(s);
                    },
                    out, 4);
            },
            4);
    } else if (const auto* pstart = std::get_if<PurityStart>(&initial)) {
        series.observables = {"s2"};
        series.cells = fill_with(
            [&](RandomStream& rs, std::span<double> out) {
                detail::run_recorded_path(
                    pstart->s2, rec, steps,
                    [&](double& s2) { s2 = step_purity(s2, dt, sqrt_dt * rs.normal()); },
                    [&](double s2, std::span<double> o) { o[0] = s2; }, out, 1);
            },
            1);
    } else if (const auto* dstart = std::get_if<DensityStart>(&initial)) {
        series.observables = {"sx", "sy", "sz", "s2"};
        series.cells = fill_with(
            [&](RandomStream& rs, std::span<double> out) {
                detail::run_recorded_path(
                    dstart->rho, rec, steps,
                    [&](QubitDensity& rho) { rho = step_density(rho, dt, noise_increment(rs, dt)); },
                    [&](const QubitDensity& rho, std::span<double> o) {
                        const Vec3 s = density_to_bloch(rho);
                        o[0] = s.x;
                        o[1] = s.y;
                        o[2] = s.z;
                        o[3] = norm2(s);
                    },
                    out, 4);
            },
            4);
    } else {
        const QubitDensity apriori = std::get<PropagatorStart>(initial).apriori;
        series.observables = {"tr_rho", "tr_rho_prime", "tr_rho_q", "bloch_dev_vs_direct", "s2_hypo"};
        struct PathState {
            PropagatorPair pair;
            QubitDensity direct;
        };
        series.cells = fill_with(
            [&](RandomStream& rs, std::span<double> out) {
                detail::run_recorded_path(
                    PathState{initial_propagators(apriori), apriori}, rec, steps,
                    [&](PathState& st) {
                        const Vec3 dW = noise_increment(rs, dt);
                        st.pair = step_propagators(st.pair, apriori, dt, dW).pair;
                        st.direct = step_density(st.direct, dt, dW);
                    },
                    [&](const PathState& st, std::span<double> o) {
                        const auto states = reconstruct_states(st.pair, apriori);
                        o[0] = states.rho.mat.trace().real();
                        o[1] = states.rho_prime.mat.trace().real();
                        o[2] = states.rho_hypo.mat.trace().real();
                        o[3] = norm(density_to_bloch(states.rho) - density_to_bloch(st.direct));
                        o[4] = purity(states.rho_hypo);
                    },
                    out, 5);
            },
            5);
    }
    return series;
}

}  // namespace weakmeas
