#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>

#include "weakmeas/errors.hpp"
#include "weakmeas/vec3.hpp"

namespace weakmeas {

using Matrix2c = Eigen::Matrix2cd;
using complex = std::complex<double>;

/// Overshoot of |s| beyond 1 tolerated as rounding noise in the exact
/// (discrete-measurement) layer; anything larger there is a bug.
inline constexpr double kBlochClampTol = 1e-9;

/// |s| <= 1 acceptance slack for inputs.
inline constexpr double kBlochInputTol = 1e-12;

inline const Matrix2c& pauli_x() {
    static const Matrix2c m = (Matrix2c() << 0, 1, 1, 0).finished();
    return m;
}
inline const Matrix2c& pauli_y() {
    static const Matrix2c m = (Matrix2c() << 0, complex(0, -1), complex(0, 1), 0).finished();
    return m;
}
inline const Matrix2c& pauli_z() {
    static const Matrix2c m = (Matrix2c() << 1, 0, 0, -1).finished();
    return m;
}
inline const Matrix2c& pauli(int i) {
    switch (i) {
        case 0: return pauli_x();
        case 1: return pauli_y();
        default: return pauli_z();
    }
}

/// a.x sigma_x + a.y sigma_y + a.z sigma_z
inline Matrix2c pauli_dot(const Vec3& a) {
    Matrix2c m;
    m << a.z, complex(a.x, -a.y), complex(a.x, a.y), -a.z;
    return m;
}

/// Hermitian unit-trace 2x2 density matrix.
struct QubitDensity {
    Matrix2c mat = Matrix2c::Identity() * 0.5;
};

inline QubitDensity maximally_mixed() { return QubitDensity{}; }

/// (I + s.sigma)/2. Rejects |s| > 1 beyond rounding slack.
inline QubitDensity bloch_to_density(const Vec3& s) {
    if (!is_finite(s) || norm(s) > 1.0 + kBlochInputTol) {
        throw ValidationError("bloch_to_density: Bloch vector leaves the unit ball");
    }
    QubitDensity q;
    q.mat = 0.5 * (Matrix2c::Identity() + pauli_dot(s));
    return q;
}

inline Vec3 density_to_bloch(const QubitDensity& q) {
    const complex m10 = q.mat(1, 0);
    return {2.0 * m10.real(), 2.0 * m10.imag(), q.mat(0, 0).real() - q.mat(1, 1).real()};
}

/// tr[rho^2]; for Hermitian rho this is the squared Frobenius norm.
inline double purity(const QubitDensity& q) { return q.mat.squaredNorm(); }

/// tr[a b] (real for Hermitian arguments); equals (1 + u.v)/2 on Bloch vectors.
inline double fidelity(const QubitDensity& a, const QubitDensity& b) {
    return (a.mat * b.mat).trace().real();
}

struct EigenPair {
    double value = 0.0;
    Vec3 state;  // pure state as a unit Bloch vector
};

/// Spectral decomposition, larger eigenvalue first: {(1+|v|)/2, +v_hat} and
/// {(1-|v|)/2, -v_hat}. Degenerate v ~ 0 ties break to the +/- z axis.
inline std::array<EigenPair, 2> eigensystem(const QubitDensity& q) {
    const Vec3 v = density_to_bloch(q);
    const double n = norm(v);
    const Vec3 axis = (n < 1e-12) ? Vec3{0.0, 0.0, 1.0} : normalized(v);
    return {EigenPair{0.5 * (1.0 + n), axis}, EigenPair{0.5 * (1.0 - n), -axis}};
}

/// Pull |s| back onto the sphere when it overshoots by at most `tol` from
/// rounding; larger overshoot is an error in the exact layer.
inline Vec3 clamp_bloch(const Vec3& s, double tol = kBlochClampTol) {
    const double n = norm(s);
    if (n <= 1.0) return s;
    if (n > 1.0 + tol) throw NumericalError("clamp_bloch: |s| overshoot exceeds tolerance");
    return {s.x / n, s.y / n, s.z / n};
}

}  // namespace weakmeas
