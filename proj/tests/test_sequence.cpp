#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "weakmeas/quadrature.hpp"
#include "weakmeas/sequence.hpp"
#include "weakmeas/stats.hpp"

using namespace weakmeas;
using Catch::Approx;

namespace {

const Vec3 kZ{0, 0, 1};

Matrix2c brute_root(double sigma, const Vec3& n, double delta) {
    const double nrm = 1.0 / std::sqrt(2.0 * std::numbers::pi * delta * delta);
    const double cp = nrm * std::exp(-(1.0 - sigma) * (1.0 - sigma) / (2.0 * delta * delta));
    const double cm = nrm * std::exp(-(1.0 + sigma) * (1.0 + sigma) / (2.0 * delta * delta));
    const Matrix2c p_plus = 0.5 * (Matrix2c::Identity() + pauli_dot(n));
    const Matrix2c p_minus = 0.5 * (Matrix2c::Identity() - pauli_dot(n));
    return std::sqrt(cp) * p_plus + std::sqrt(cm) * p_minus;
}

}  // namespace

TEST_CASE("kraus accumulation") {
    SECTION("isotropic element keeps the identity shape") {
        const double delta = 1.3;
        const auto e = gaussian_povm_element(0.0, kZ, delta);
        const auto acc = kraus_extend(KrausAccumulator{}, e);
        CHECK((acc.op - Matrix2c::Identity()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(acc.log_weight == Approx(std::log(std::sqrt(e.coeff_plus))).margin(1e-12));
    }
    SECTION("commuting steps combine Gaussian exponents") {
        const double delta = 0.9;
        const double s1 = 0.7, s2 = -1.3;
        auto acc = kraus_extend(KrausAccumulator{}, gaussian_povm_element(s1, kZ, delta));
        acc = kraus_extend(acc, gaussian_povm_element(s2, kZ, delta));
        const Matrix2c brute = brute_root(s2, kZ, delta) * brute_root(s1, kZ, delta);
        const Matrix2c lib = std::exp(acc.log_weight) * acc.op;
        REQUIRE((lib - brute).cwiseAbs().maxCoeff() < 1e-10);
    }
    SECTION("long products stay normalized and finite") {
        RandomStream rng(31, 0);
        KrausAccumulator acc;
        const double delta = 20.0;
        for (int k = 0; k < 10000; ++k) {
            const Vec3 n = sample_uniform_sphere(rng);
            const double sigma = sample_outcome_bloch({0, 0, 0}, n, delta, rng);
            acc = kraus_extend(acc, gaussian_povm_element(sigma, n, delta));
        }
        REQUIRE(std::isfinite(acc.log_weight));
        REQUIRE(acc.op.allFinite());
        REQUIRE(spectral_norm_2x2(acc.op) == Approx(1.0).margin(1e-9));
    }
    SECTION("spectral norm closed form") {
        RandomStream rng(32, 0);
        for (int i = 0; i < 500; ++i) {
            Matrix2c m;
            m << complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal()),
                complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal());
            Eigen::JacobiSVD<Matrix2c> svd(m);
            REQUIRE(spectral_norm_2x2(m) == Approx(svd.singularValues()(0)).margin(1e-10));
        }
    }
}

TEST_CASE("run_sequence base cases") {
    RandomStream rng(33, 0);
    SECTION("zero measurements") {
        const QubitDensity apriori = bloch_to_density({0.1, -0.3, 0.5});
        const auto res = run_sequence(apriori, 0, 2.0, DirectionPolicy::fresh_random(), SamplingSource::TrueState, rng);
        CHECK(res.steps.empty());
        CHECK((res.posterior.mat - apriori.mat).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(norm(density_to_bloch(res.mixed_estimate)) < 1e-15);
        CHECK(norm(density_to_bloch(res.hypothetical_posterior)) < 1e-15);
        CHECK(res.log_probability_density == 0.0);
    }
    SECTION("single measurement reduces to the one-shot update") {
        const Vec3 s0{0.2, 0.4, -0.1};
        const auto res =
            run_sequence(bloch_to_density(s0), 1, 1.5, DirectionPolicy::fresh_random(), SamplingSource::TrueState, rng);
        REQUIRE(res.steps.size() == 1);
        const auto& step = res.steps[0];
        const Vec3 expected = posterior_update_bloch(s0, step.outcome, step.direction, 1.5);
        CHECK(norm(density_to_bloch(res.posterior) - expected) < 1e-12);
        const auto element = gaussian_povm_element(step.outcome, step.direction, 1.5);
        CHECK((res.mixed_estimate.mat - mixed_estimate(element).mat).cwiseAbs().maxCoeff() < 1e-12);
        // one Hermitian factor: estimate and mixed-start conditioned state coincide
        CHECK((res.mixed_estimate.mat - res.hypothetical_posterior.mat).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("repeated measurement along a fixed axis acts as classical inference") {
    RandomStream rng(34, 0);
    const auto res =
        run_sequence(bloch_to_density(kZ), 10000, 5.0, DirectionPolicy::fixed(kZ), SamplingSource::TrueState, rng);
    CHECK(density_to_bloch(res.posterior).z >= 0.999);
}

TEST_CASE("stepwise composition equals batch composition") {
    RandomStream rng(35, 0);
    for (double delta : {0.8, 3.0}) {
        const Vec3 s0 = 0.6 * sample_uniform_sphere(rng);
        const QubitDensity apriori = bloch_to_density(s0);
        const auto res =
            run_sequence(apriori, 20, delta, DirectionPolicy::fresh_random(), SamplingSource::TrueState, rng);
        Matrix2c g = Matrix2c::Identity();
        for (const auto& step : res.steps) g = brute_root(step.outcome, step.direction, delta) * g;
        const Matrix2c rho_raw = g * apriori.mat * g.adjoint();
        const Matrix2c hypo_raw = g * g.adjoint();
        const Matrix2c mixed_raw = g.adjoint() * g;
        const Matrix2c rho = rho_raw / rho_raw.trace().real();
        const Matrix2c hypo = hypo_raw / hypo_raw.trace().real();
        const Matrix2c mixed = mixed_raw / mixed_raw.trace().real();
        REQUIRE((rho - res.posterior.mat).cwiseAbs().maxCoeff() < 1e-8);
        REQUIRE((hypo - res.hypothetical_posterior.mat).cwiseAbs().maxCoeff() < 1e-8);
        REQUIRE((mixed - res.mixed_estimate.mat).cwiseAbs().maxCoeff() < 1e-8);
        // chain-rule density equals the batch element expectation
        const double batch = (mixed_raw * apriori.mat).trace().real();
        REQUIRE(std::exp(res.log_probability_density) == Approx(batch).epsilon(1e-6));
    }
}

TEST_CASE("two-step completeness by quadrature (commuting directions)") {
    const double delta = 1.0;
    const auto rule = gauss_legendre(12);
    const double lo = -1.0 - 12.0 * delta;
    const double hi = 1.0 + 12.0 * delta;
    // tr of the two-step element factorizes over the shared eigenbasis
    auto coeff = [&](double sigma, double sign) {
        return std::exp(-(sign - sigma) * (sign - sigma) / (2.0 * delta * delta)) /
               std::sqrt(2.0 * std::numbers::pi * delta * delta);
    };
    const auto rule_outer = rule;
    double total = 0.0;
    const std::size_t panels = 80;
    const double h = (hi - lo) / panels;
    for (std::size_t p1 = 0; p1 < panels; ++p1) {
        for (std::size_t k1 = 0; k1 < rule_outer.nodes.size(); ++k1) {
            const double x1 = lo + (p1 + 0.5) * h + 0.5 * h * rule_outer.nodes[k1];
            const double w1 = 0.5 * h * rule_outer.weights[k1];
            double inner_p = 0.0, inner_m = 0.0;
            for (std::size_t p2 = 0; p2 < panels; ++p2) {
                for (std::size_t k2 = 0; k2 < rule.nodes.size(); ++k2) {
                    const double x2 = lo + (p2 + 0.5) * h + 0.5 * h * rule.nodes[k2];
                    const double w2 = 0.5 * h * rule.weights[k2];
                    inner_p += w2 * coeff(x2, 1.0);
                    inner_m += w2 * coeff(x2, -1.0);
                }
            }
            total += w1 * (coeff(x1, 1.0) * inner_p + coeff(x1, -1.0) * inner_m);
        }
    }
    CHECK(total == Approx(2.0).margin(1e-6));
}

TEST_CASE("mixed-start sampling makes the two conditional chains coincide") {
    RandomStream rng(36, 0);
    std::size_t checked = 0;
    run_sequence_steps({0, 0, 0}, 200, 3.0, DirectionPolicy::fresh_random(), SamplingSource::Hypothetical, rng,
                       [&](const SequenceStepView& v) {
                           REQUIRE(norm(v.true_state - v.hypo_state) < 1e-10);
                           ++checked;
                       });
    CHECK(checked == 200);
}

TEST_CASE("estimate and mixed-start state differ for non-commuting steps") {
    const double delta = 1.2;
    const Vec3 n1{1, 0, 0};
    auto acc = kraus_extend(KrausAccumulator{}, gaussian_povm_element(0.7, n1, delta));
    acc = kraus_extend(acc, gaussian_povm_element(-0.4, kZ, delta));
    const Matrix2c gg = acc.op * acc.op.adjoint();
    const QubitDensity hypo{gg / gg.trace().real()};
    const QubitDensity mixed = mixed_estimate(acc);
    CHECK((hypo.mat - mixed.mat).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("conditioned-state purity rises in expectation") {
    const double delta = 20.0;
    const std::size_t trajectories = 1000;
    const std::vector<std::size_t> marks{0, 50, 100, 150, 200};
    RandomStream base(37, 0);
    auto cells = ensemble_summaries(trajectories, marks.size(), 1, [&](std::size_t i, std::span<double> out) {
        RandomStream rs = base.substream(i);
        out[0] = 0.5;
        run_sequence_steps({0, 0, 0}, marks.back(), delta, DirectionPolicy::fresh_random(),
                           SamplingSource::Hypothetical, rs, [&](const SequenceStepView& v) {
                               for (std::size_t m = 1; m < marks.size(); ++m) {
                                   if (v.step == marks[m]) out[m] = 0.5 * (1.0 + norm2(v.hypo_state));
                               }
                           });
    });
    for (std::size_t m = 1; m < marks.size(); ++m) {
        const double se = std::hypot(cells[m].standard_error(), cells[m - 1].standard_error());
        REQUIRE(cells[m].mean - cells[m - 1].mean >= -3.0 * se);
    }
    CHECK(cells.back().mean > cells.front().mean);
}

TEST_CASE("sequential fidelity follows the drift curve under the empirical rate") {
    // The engine's continuum limit carries one unit of purity drift per
    // 12*delta^2 measurements; this pins the discrete <-> continuum match.
    const double delta = 20.0;
    const std::size_t n_max = 2400;
    const std::vector<std::size_t> marks{200, 600, 1200, 2400};
    RandomStream base(38, 0);
    auto cells = ensemble_summaries(2000, marks.size(), 2, [&](std::size_t i, std::span<double> out) {
        RandomStream rs = base.substream(i);
        run_sequence_steps({0, 0, 0}, n_max, delta, DirectionPolicy::fresh_random(), SamplingSource::Hypothetical, rs,
                           [&](const SequenceStepView& v) {
                               for (std::size_t m = 0; m < marks.size(); ++m) {
                                   if (v.step == marks[m]) out[m] = 0.5 * (1.0 + norm2(v.hypo_state));
                               }
                           });
    });
    for (std::size_t m = 0; m < marks.size(); ++m) {
        const double fbar = (1.0 + cells[m].mean) / 3.0;
        const double t = static_cast<double>(marks[m]) / (12.0 * delta * delta);
        const double closed = 0.5 + drift_purity(t) / 6.0;
        INFO("n = " << marks[m] << ": fbar = " << fbar << ", drift curve = " << closed);
        REQUIRE(std::abs(fbar - closed) <= 0.01);
    }
}
