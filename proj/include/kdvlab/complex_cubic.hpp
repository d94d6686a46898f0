/*
 * complex_cubic.hpp — roots of the characteristic cubic λ³ + λ + iz = 0.
 *
 * The spatial symbol of the linear operator ∂x + ∂xxx at temporal frequency z
 * is the cubic above; its three roots λ_1, λ_2, λ_3 drive every spectral
 * quantity in this library.  Key facts used here:
 *
 *   - Vieta:  λ1+λ2+λ3 = 0,  λ1λ2+λ2λ3+λ3λ1 = 1,  λ1λ2λ3 = −iz.
 *   - Branch points at z = ±2/(3√3) where a double root ∓i/√3 collides
 *     (the remaining simple root is ±2i/√3).
 *   - Large-|z| behaviour:  λ_j ≈ μ_j z^{1/3} − z^{−1/3}/(3 μ_j), with
 *     μ_j = e^{−iπ/6 − 2ijπ/3} and z^{1/3} the principal cube root.
 *
 * Roots are returned ordered by increasing real part (ties broken by
 * increasing imaginary part), which keeps downstream exponential
 * normalisations e^{λ(x−L)} uniformly bounded.
 *
 * Accuracy strategy: Cardano seeds, Newton polish, then the best-conditioned
 * root (largest |3λ²+1|) is refined and the other two are recovered from the
 * quadratic λ² + λ_b λ + (1 + λ_b²) = 0.  This stays stable arbitrarily close
 * to the branch points, where naive Newton on the near-double pair stalls.
 */

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace kdvlab {

using cplx = std::complex<double>;

// Branch points of z ↦ {λ_j(z)} on the real axis: z = ±2/(3√3).
inline constexpr double branch_point = 2.0 / (3.0 * 1.7320508075688772);

// Radius around ±2/(3√3) inside which the near_branch flag is raised and
// seeds come from the local Puiseux expansion instead of raw Cardano.
inline constexpr double branch_radius = 1e-6;

// Roots of λ³ + λ + iz = 0, ordered by (Re, then Im) ascending.
struct RootTriple {
    cplx z;                         // frequency the roots belong to
    std::array<cplx, 3> lambda;     // λ1, λ2, λ3 with Re λ1 ≤ Re λ2 ≤ Re λ3
    bool near_branch = false;       // z within branch_radius of ±2/(3√3)
};

namespace detail {

inline cplx cubic_residual(cplx lam, cplx z) {
    return lam * lam * lam + lam + cplx(0.0, 1.0) * z;
}

// One Newton step for λ³ + λ + iz = 0; returns λ unchanged if the
// derivative is too small to trust (near-double root).
inline cplx newton_step(cplx lam, cplx z) {
    const cplx d = 3.0 * lam * lam + 1.0;
    if (std::abs(d) < 1e-8) return lam;
    return lam - cubic_residual(lam, z) / d;
}

inline void sort_roots(std::array<cplx, 3> &r) {
    auto less = [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    };
    if (less(r[1], r[0])) std::swap(r[0], r[1]);
    if (less(r[2], r[1])) std::swap(r[1], r[2]);
    if (less(r[1], r[0])) std::swap(r[0], r[1]);
}

} // namespace detail

// Solve λ³ + λ + iz = 0.  Residuals |λ³+λ+iz| ≤ ~1e−12·(1+|z|) per root,
// uniformly including the branch points (where the double root is reported
// with multiplicity two).  Throws std::domain_error on non-finite z.
inline RootTriple solve_cubic(cplx z) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::domain_error("solve_cubic: non-finite frequency");

    RootTriple out;
    out.z = z;
    out.near_branch = std::abs(z - branch_point) < branch_radius ||
                      std::abs(z + branch_point) < branch_radius;

    const cplx q = cplx(0.0, 1.0) * z;   // cubic is λ³ + λ + q
    std::array<cplx, 3> r;

    // Cardano seeds.  D = q²/4 + 1/27; pick the cube-root argument with the
    // larger modulus to avoid cancellation.
    const cplx D = 0.25 * q * q + 1.0 / 27.0;
    const cplx s = std::sqrt(D);
    cplx u3 = -0.5 * q + s;
    if (std::abs(u3) < std::abs(-0.5 * q - s)) u3 = -0.5 * q - s;
    if (std::abs(u3) < 1e-300) {
        // q ≈ 0 and D ≈ 0 cannot happen (D(0) = 1/27); defensive only.
        u3 = cplx(1.0 / 27.0, 0.0);
    }
    const cplx u = std::pow(u3, 1.0 / 3.0);
    const cplx omega(-0.5, 0.8660254037844386);
    cplx uk = u;
    for (int k = 0; k < 3; ++k) {
        r[k] = uk - 1.0 / (3.0 * uk);
        uk *= omega;
    }

    // Newton polish each seed (cheap, quadratic convergence).
    for (auto &lam : r) {
        lam = detail::newton_step(lam, z);
        lam = detail::newton_step(lam, z);
    }

    // Stabilise: refine the best-conditioned root, regenerate the other two
    // from the exact deflation λ² + λ_b λ + (1 + λ_b²) = 0.
    int best = 0;
    double best_cond = -1.0;
    for (int k = 0; k < 3; ++k) {
        const double c = std::abs(3.0 * r[k] * r[k] + 1.0);
        if (c > best_cond) { best_cond = c; best = k; }
    }
    cplx lb = r[best];
    for (int it = 0; it < 3; ++it) lb = detail::newton_step(lb, z);

    const cplx disc = -3.0 * lb * lb - 4.0;   // (λa − λc)²
    const cplx sq = std::sqrt(disc);
    cplx la = 0.5 * (-lb + sq);
    cplx lc = 0.5 * (-lb - sq);
    // Recover the smaller root from the product λa·λc = 1 + λ_b² when the
    // subtraction above cancelled.
    const cplx prod = 1.0 + lb * lb;
    if (std::abs(la) < std::abs(lc)) {
        if (std::abs(lc) > 0.0) la = prod / lc;
    } else {
        if (std::abs(la) > 0.0) lc = prod / la;
    }
    // Final touch-up where well-conditioned.
    if (std::abs(3.0 * la * la + 1.0) > 1e-4) la = detail::newton_step(la, z);
    if (std::abs(3.0 * lc * lc + 1.0) > 1e-4) lc = detail::newton_step(lc, z);

    out.lambda = {lb, la, lc};
    detail::sort_roots(out.lambda);
    return out;
}

// Roots of the conjugate cubic at shifted frequency: λ̃_j = conj(λ_j(z − p)),
// re-sorted by the same (Re, Im) convention.  These appear whenever a
// quadratic quantity is paired against the mode rotating at rate p.
inline RootTriple tilde_roots(cplx z, double p) {
    RootTriple base = solve_cubic(z - p);
    RootTriple out;
    out.z = z;
    out.near_branch = base.near_branch;
    for (int k = 0; k < 3; ++k) out.lambda[k] = std::conj(base.lambda[k]);
    detail::sort_roots(out.lambda);
    return out;
}

// Leading large-|z| approximation λ_j ≈ μ_j z^{1/3} − z^{−1/3}/(3μ_j),
// j ∈ {1,2,3}; μ_j = e^{−iπ/6 − 2ijπ/3}.  Used to validate asymptotics.
inline cplx lambda_asymptotic(cplx z, int j) {
    if (j < 1 || j > 3) throw std::domain_error("lambda_asymptotic: j in 1..3");
    const double pi = 3.14159265358979323846;
    const cplx mu = std::polar(1.0, -pi / 6.0 - 2.0 * j * pi / 3.0);
    // Principal cube root with positive real part: cbrt on modulus, arg/3.
    const cplx z13 = std::pow(z, 1.0 / 3.0);
    return mu * z13 - 1.0 / (3.0 * mu * z13);
}

} // namespace kdvlab
