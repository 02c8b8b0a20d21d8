#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "weakmeas/quadrature.hpp"
#include "weakmeas/qubit.hpp"
#include "weakmeas/rng.hpp"

using namespace weakmeas;
using Catch::Approx;

namespace {

// States distributed over the whole ball (not uniform; coverage is what matters).
Vec3 random_ball_state(RandomStream& rng) {
    const double r = std::cbrt(rng.uniform01());
    return r * sample_uniform_sphere(rng);
}

}  // namespace

TEST_CASE("bloch/matrix round trip on reference states") {
    CHECK(bloch_to_density({0, 0, 0}).mat.isApprox(0.5 * Matrix2c::Identity(), 1e-15));

    const Matrix2c up = (Matrix2c() << 1, 0, 0, 0).finished();
    CHECK(bloch_to_density({0, 0, 1}).mat.isApprox(up, 1e-15));

    const Matrix2c plus_x = (Matrix2c() << 0.5, 0.5, 0.5, 0.5).finished();
    CHECK(bloch_to_density({1, 0, 0}).mat.isApprox(plus_x, 1e-15));

    CHECK_THROWS_AS(bloch_to_density({1.0 + 1e-6, 0, 0}), ValidationError);
}

TEST_CASE("bloch/matrix round trip is the identity over the ball") {
    RandomStream rng(101, 0);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 s = random_ball_state(rng);
        const Vec3 back = density_to_bloch(bloch_to_density(s));
        REQUIRE(std::abs(back.x - s.x) <= 1e-12);
        REQUIRE(std::abs(back.y - s.y) <= 1e-12);
        REQUIRE(std::abs(back.z - s.z) <= 1e-12);
    }
}

TEST_CASE("purity") {
    CHECK(purity(maximally_mixed()) == Approx(0.5).margin(1e-15));
    CHECK(purity(bloch_to_density({0, 1, 0})) == Approx(1.0).margin(1e-12));
    // brute force: square the matrix and take the trace
    const QubitDensity q = bloch_to_density({0, 0, 0.6});
    const double brute = (q.mat * q.mat).trace().real();
    CHECK(brute == Approx(0.68).margin(1e-12));
    CHECK(purity(q) == Approx(brute).margin(1e-12));

    RandomStream rng(102, 0);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 s = random_ball_state(rng);
        const QubitDensity r = bloch_to_density(s);
        const double direct = (r.mat * r.mat).trace().real();
        REQUIRE(purity(r) == Approx(direct).margin(1e-12));
        REQUIRE(purity(r) == Approx(0.5 * (1.0 + norm2(s))).margin(1e-12));
    }
}

TEST_CASE("fidelity") {
    const QubitDensity a = bloch_to_density({0, 0, 1});
    const QubitDensity b = bloch_to_density({0, 0, -1});
    CHECK(fidelity(a, a) == Approx(1.0).margin(1e-12));
    CHECK(fidelity(a, b) == Approx(0.0).margin(1e-12));
    CHECK(fidelity(maximally_mixed(), a) == Approx(0.5).margin(1e-12));

    RandomStream rng(103, 0);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 u = random_ball_state(rng);
        const Vec3 v = random_ball_state(rng);
        const QubitDensity qu = bloch_to_density(u);
        const QubitDensity qv = bloch_to_density(v);
        REQUIRE(fidelity(qu, qv) == Approx(0.5 * (1.0 + dot(u, v))).margin(1e-12));
        REQUIRE(fidelity(qu, qv) == Approx(fidelity(qv, qu)).margin(1e-14));
    }
}

TEST_CASE("fidelity is bilinear in mixtures") {
    RandomStream rng(104, 0);
    for (int i = 0; i < 500; ++i) {
        const Vec3 s1 = random_ball_state(rng);
        const Vec3 s2 = random_ball_state(rng);
        const Vec3 t = random_ball_state(rng);
        const double a = rng.uniform01();
        QubitDensity mix;
        mix.mat = a * bloch_to_density(s1).mat + (1.0 - a) * bloch_to_density(s2).mat;
        const QubitDensity qt = bloch_to_density(t);
        const double lhs = fidelity(mix, qt);
        const double rhs = a * fidelity(bloch_to_density(s1), qt) + (1.0 - a) * fidelity(bloch_to_density(s2), qt);
        REQUIRE(lhs == Approx(rhs).margin(1e-12));
    }
}

TEST_CASE("eigensystem") {
    SECTION("partially mixed reference state") {
        const auto eig = eigensystem(bloch_to_density({0, 0, 0.8}));
        CHECK(eig[0].value == Approx(0.9).margin(1e-12));
        CHECK(eig[1].value == Approx(0.1).margin(1e-12));
        CHECK(eig[0].state.z == Approx(1.0).margin(1e-12));
        CHECK(eig[1].state.z == Approx(-1.0).margin(1e-12));
    }
    SECTION("pure state") {
        const Vec3 v = normalized({1, -2, 2});
        const auto eig = eigensystem(bloch_to_density(v));
        CHECK(eig[0].value == Approx(1.0).margin(1e-12));
        CHECK(eig[1].value == Approx(0.0).margin(1e-12));
        CHECK(norm(eig[0].state - v) < 1e-12);
    }
    SECTION("degenerate tie-break is the z axis") {
        const auto eig = eigensystem(maximally_mixed());
        CHECK(eig[0].value == Approx(0.5).margin(1e-15));
        CHECK(eig[1].value == Approx(0.5).margin(1e-15));
        CHECK(eig[0].state.z == 1.0);
        CHECK(eig[1].state.z == -1.0);
    }
    SECTION("reconstruction") {
        RandomStream rng(105, 0);
        for (int i = 0; i < 1000; ++i) {
            const QubitDensity q = bloch_to_density(random_ball_state(rng));
            const auto eig = eigensystem(q);
            Matrix2c rebuilt = Matrix2c::Zero();
            for (const auto& p : eig) rebuilt += p.value * bloch_to_density(p.state).mat;
            REQUIRE((rebuilt - q.mat).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("clamp_bloch") {
    const Vec3 slight{0.0, 0.0, 1.0 + 1e-10};
    CHECK(norm(clamp_bloch(slight)) == Approx(1.0).margin(1e-15));
    CHECK_THROWS_AS(clamp_bloch({0.0, 0.0, 1.0 + 1e-6}), NumericalError);
    const Vec3 inside{0.1, 0.2, 0.3};
    const Vec3 same = clamp_bloch(inside);
    CHECK(same.x == inside.x);
}

TEST_CASE("uniform sphere sampling moments") {
    RandomStream rng(7, 0);
    const int n = 1000000;
    double sum_x = 0, sum_y = 0, sum_z = 0, sum_z2 = 0;
    for (int i = 0; i < n; ++i) {
        const Vec3 v = sample_uniform_sphere(rng);
        REQUIRE(std::abs(norm(v) - 1.0) < 1e-12);
        sum_x += v.x;
        sum_y += v.y;
        sum_z += v.z;
        sum_z2 += v.z * v.z;
    }
    const double bound = 3.0 * (1.0 / std::sqrt(3.0)) / 1000.0;  // 3 sd of the per-component mean
    CHECK(std::abs(sum_x / n) < bound);
    CHECK(std::abs(sum_y / n) < bound);
    CHECK(std::abs(sum_z / n) < bound);
    CHECK(std::abs(sum_z2 / n - 1.0 / 3.0) < 0.002);
}

TEST_CASE("random streams are deterministic and addressable") {
    RandomStream a(123456789, 42);
    RandomStream b(123456789, 42);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(a.uniform01() == b.uniform01());
        REQUIRE(a.normal() == b.normal());
    }
    RandomStream base(123456789, 0);
    RandomStream c = base.substream(5);
    RandomStream d = base.substream(5);
    RandomStream e = base.substream(6);
    CHECK(c.uniform01() == d.uniform01());
    CHECK(c.uniform01() != e.uniform01());

    RandomStream f(123456789, 0);
    const Vec3 first = sample_uniform_sphere(f);
    RandomStream g(123456789, 0);
    const Vec3 again = sample_uniform_sphere(g);
    CHECK(first.x == again.x);
    CHECK(first.z == again.z);
}

TEST_CASE("normal generator moments") {
    RandomStream rng(9, 3);
    const int n = 400000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s1 += x;
        s2 += x * x;
    }
    CHECK(std::abs(s1 / n) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("gauss-legendre composite quadrature") {
    const auto rule = gauss_legendre(16);
    const double cubic = integrate_composite([](double x) { return x * x * x; }, 0.0, 1.0, 4, rule);
    CHECK(cubic == Approx(0.25).margin(1e-14));
    // unit-mass Gaussian over a wide window
    const double mass = integrate_composite(
        [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }, -40.0, 40.0, 200, rule);
    CHECK(mass == Approx(1.0).margin(1e-12));
}
