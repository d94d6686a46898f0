/*
 * spectral.hpp — frequency-domain quantities built from the cubic roots.
 *
 * For the operator ∂x + ∂xxx on (0, L) with Dirichlet ends and a Neumann
 * input at x = L, the boundary-value structure at frequency z is carried by
 * the 3×3 matrix
 *
 *        [ 1          1          1        ]
 *   Q =  [ e^{λ1 L}   e^{λ2 L}   e^{λ3 L} ]
 *        [ λ1 e^{λ1 L}  λ2 e^{λ2 L}  λ3 e^{λ3 L} ]
 *
 * with λ_j the roots of λ³ + λ + iz = 0.  Using λ1+λ2+λ3 = 0:
 *
 *   det Q = Σ_j (λ_{j+1} − λ_j) e^{−λ_{j+2} L}          (indices mod 3)
 *   P     = Σ_j λ_j (e^{λ_{j+2} L} − e^{λ_{j+1} L})
 *   Ξ     = −(λ2 − λ1)(λ3 − λ2)(λ1 − λ3)
 *
 * The ratios G = P/Ξ and H = det Q/Ξ extend to entire functions of z; their
 * real zeros are the frequencies at which boundary controllability of the
 * linearised equation degenerates.  This header provides:
 *
 *   spectral_sample    : Q, det Q, P, Ξ, G, H at one frequency
 *   find_real_zeros_H  : bracketing + Newton root search on a real window
 *   shoot_theta        : independent ODE shooting cross-check of the zeros
 *   pre1_sum           : the lattice sum Σ |n|^j / (|z + 4n − n³| + n²)
 *   detq_line_bound    : lower-bound probe for |det Q| on horizontal lines
 *   monodromy_defect   : single-valuedness check of G, H around the branch
 *                        points of the root system
 */

#pragma once

#include <kdvlab/complex_cubic.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace kdvlab {

struct SpectralSample {
    cplx z;
    double L = 0.0;
    RootTriple roots;
    std::array<std::array<cplx, 3>, 3> Q{};  // rows: 1; e^{λL}; λ e^{λL}
    cplx detQ;                               // closed-form sum
    cplx P;
    cplx Xi;
    cplx G;                                  // P/Ξ, entire
    cplx H;                                  // detQ/Ξ, entire
};

namespace detail {

// det Q and P from a given (possibly permuted) root triple.
inline cplx detq_sum(const std::array<cplx, 3> &l, double L) {
    cplx s = 0.0;
    for (int j = 0; j < 3; ++j)
        s += (l[(j + 1) % 3] - l[j]) * std::exp(-l[(j + 2) % 3] * L);
    return s;
}

inline cplx p_sum(const std::array<cplx, 3> &l, double L) {
    cplx s = 0.0;
    for (int j = 0; j < 3; ++j)
        s += l[j] * (std::exp(l[(j + 2) % 3] * L) - std::exp(l[(j + 1) % 3] * L));
    return s;
}

inline cplx vandermonde(const std::array<cplx, 3> &l) {
    return -(l[1] - l[0]) * (l[2] - l[1]) * (l[0] - l[2]);
}

} // namespace detail

// Assemble all frequency-domain quantities at (z, L).  Near a root collision
// (|Ξ| ≤ 1e−8) the entire ratios G, H are evaluated by averaging over four
// points on a circle of radius 1e−4 around z (mean-value property), instead
// of the 0/0 direct quotient.
inline SpectralSample spectral_sample(cplx z, double L) {
    if (!(L > 0.0)) throw std::domain_error("spectral_sample: L must be positive");
    SpectralSample s;
    s.z = z;
    s.L = L;
    s.roots = solve_cubic(z);
    const auto &l = s.roots.lambda;
    for (int k = 0; k < 3; ++k) {
        const cplx e = std::exp(l[k] * L);
        s.Q[0][k] = 1.0;
        s.Q[1][k] = e;
        s.Q[2][k] = l[k] * e;
    }
    s.detQ = detail::detq_sum(l, L);
    s.P = detail::p_sum(l, L);
    s.Xi = detail::vandermonde(l);
    if (std::abs(s.Xi) > 1e-8) {
        s.G = s.P / s.Xi;
        s.H = s.detQ / s.Xi;
    } else {
        cplx g = 0.0, h = 0.0;
        const double r = 1e-4;
        for (int k = 0; k < 4; ++k) {
            const cplx zz = z + std::polar(r, 1.5707963267948966 * k + 0.5);
            const auto rt = solve_cubic(zz);
            const cplx xi = detail::vandermonde(rt.lambda);
            g += detail::p_sum(rt.lambda, L) / xi;
            h += detail::detq_sum(rt.lambda, L) / xi;
        }
        s.G = 0.25 * g;
        s.H = 0.25 * h;
    }
    return s;
}

// det Q computed as a literal 3×3 determinant of the assembled matrix
// (cross-check against the closed-form sum).
inline cplx detq_matrix(const SpectralSample &s) {
    const auto &Q = s.Q;
    return Q[0][0] * (Q[1][1] * Q[2][2] - Q[1][2] * Q[2][1]) -
           Q[0][1] * (Q[1][0] * Q[2][2] - Q[1][2] * Q[2][0]) +
           Q[0][2] * (Q[1][0] * Q[2][1] - Q[1][1] * Q[2][0]);
}

// ---- real zeros of H ------------------------------------------------------

struct HZero {
    double z = 0.0;                 // location on the real axis
    cplx H_prime;                   // dH/dz at the zero
    bool simple = true;             // |H'| above the simplicity threshold
    std::array<cplx, 3> lambda{};   // roots of the cubic at the zero
};

namespace detail {

inline cplx H_of(cplx z, double L) { return spectral_sample(z, L).H; }

inline cplx H_deriv(cplx z, double L) {
    const double h = 1e-6 * (1.0 + std::abs(z));
    return (H_of(z + h, L) - H_of(z - h, L)) / (2.0 * h);
}

} // namespace detail

// Scan [z_lo, z_hi] with step 1e−3 for real zeros of H: candidates are local
// minima of |H| that dip below a relative threshold, or sampling points with
// a near-π phase jump; each candidate is polished by complex Newton.
inline std::vector<HZero> find_real_zeros_H(double L, double z_lo, double z_hi,
                                            double step = 1e-3) {
    if (!(z_hi > z_lo)) throw std::domain_error("find_real_zeros_H: empty window");
    const int n = static_cast<int>(std::ceil((z_hi - z_lo) / step)) + 1;
    std::vector<double> mag(n);
    std::vector<cplx> val(n);
    std::vector<double> zs(n);
    for (int i = 0; i < n; ++i) {
        zs[i] = z_lo + i * step;
        val[i] = detail::H_of(zs[i], L);
        mag[i] = std::abs(val[i]);
    }
    std::vector<double> sorted_mag = mag;
    std::nth_element(sorted_mag.begin(), sorted_mag.begin() + n / 2, sorted_mag.end());
    const double med = std::max(sorted_mag[n / 2], 1e-300);

    std::vector<double> seeds;
    for (int i = 1; i + 1 < n; ++i) {
        const bool local_min = mag[i] <= mag[i - 1] && mag[i] <= mag[i + 1];
        const double dphi = std::abs(std::arg(val[i + 1] / val[i]));
        if ((local_min && mag[i] < 0.5 * med) || dphi > 2.5) seeds.push_back(zs[i]);
    }

    std::vector<HZero> zeros;
    for (double seed : seeds) {
        cplx zc(seed, 0.0);
        bool ok = false;
        for (int it = 0; it < 60; ++it) {
            const cplx h = detail::H_of(zc, L);
            if (std::abs(h) < 1e-13 * (1.0 + std::abs(zc))) { ok = true; break; }
            const cplx d = detail::H_deriv(zc, L);
            if (std::abs(d) < 1e-300) break;
            const cplx stepc = h / d;
            zc -= stepc;
            if (std::abs(stepc) < 1e-15 * (1.0 + std::abs(zc))) {
                ok = std::abs(detail::H_of(zc, L)) < 1e-11 * (1.0 + std::abs(zc));
                break;
            }
        }
        if (!ok) continue;
        if (std::abs(zc.imag()) > 1e-6) continue;            // not a real zero
        const double zr = zc.real();
        if (zr < z_lo - step || zr > z_hi + step) continue;  // escaped window
        bool dup = false;
        for (const auto &prev : zeros)
            if (std::abs(prev.z - zr) < 1e-6) { dup = true; break; }
        if (dup) continue;
        HZero hz;
        hz.z = zr;
        hz.H_prime = detail::H_deriv(cplx(zr, 0.0), L);
        hz.simple = std::abs(hz.H_prime) > 1e-6;
        hz.lambda = solve_cubic(cplx(zr, 0.0)).lambda;
        zeros.push_back(hz);
    }
    std::sort(zeros.begin(), zeros.end(),
              [](const HZero &a, const HZero &b) { return a.z < b.z; });
    return zeros;
}

// ---- shooting cross-check -------------------------------------------------

// Integrate U''' + U' + zU = 0 backwards from x = L with U(L) = U'(L) = 0,
// U''(L) = 1 (classical RK4, fixed step), returning θ(z) = U(0).  θ(iζ) = 0
// exactly when det Q(ζ) = 0, giving an evaluation of the spectrum that never
// touches the cubic roots.
inline cplx shoot_theta(cplx z, double L, int n_steps = 4096) {
    if (!(L > 0.0)) throw std::domain_error("shoot_theta: L must be positive");
    if (n_steps < 16) throw std::domain_error("shoot_theta: too few steps");
    std::array<cplx, 3> y = {0.0, 0.0, 1.0};   // (U, U', U'') at x = L
    const double h = -L / n_steps;
    auto rhs = [z](const std::array<cplx, 3> &s) {
        return std::array<cplx, 3>{s[1], s[2], -s[1] - z * s[0]};
    };
    for (int i = 0; i < n_steps; ++i) {
        const auto k1 = rhs(y);
        std::array<cplx, 3> t;
        for (int k = 0; k < 3; ++k) t[k] = y[k] + 0.5 * h * k1[k];
        const auto k2 = rhs(t);
        for (int k = 0; k < 3; ++k) t[k] = y[k] + 0.5 * h * k2[k];
        const auto k3 = rhs(t);
        for (int k = 0; k < 3; ++k) t[k] = y[k] + h * k3[k];
        const auto k4 = rhs(t);
        for (int k = 0; k < 3; ++k)
            y[k] += (h / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    return y[0];
}

// ---- lattice sum ----------------------------------------------------------

struct Pre1Sum {
    double value = 0.0;   // truncated sum over 0 < |n| ≤ n_max
    double tail = 0.0;    // integral estimate of the discarded tail
};

// S_j(z) = Σ_{0<|n|≤n_max} |n|^j / (|z + 4n − n³| + n²), j ∈ {0, 1}.
// The tail beyond n_max is estimated by ∫ 2 n^{j−3} dn = 2 n_max^{j−2}/(2−j).
inline Pre1Sum pre1_sum(double z, int j, long n_max = 2000000) {
    if (j < 0 || j > 1) throw std::domain_error("pre1_sum: j in 0..1");
    if (n_max < 1000) throw std::domain_error("pre1_sum: n_max too small");
    double s = 0.0;
    for (long n = 1; n <= n_max; ++n) {
        const double nd = static_cast<double>(n);
        const double w = std::pow(nd, j);
        s += w / (std::abs(z + 4.0 * nd - nd * nd * nd) + nd * nd);
        s += w / (std::abs(z - 4.0 * nd + nd * nd * nd) + nd * nd);
    }
    Pre1Sum out;
    out.value = s;
    out.tail = 2.0 * std::pow(static_cast<double>(n_max), j - 2) / (2.0 - j);
    return out;
}

// ---- lower-bound probe on horizontal lines --------------------------------

struct LineBoundReport {
    double L = 0.0;
    int m = 0;
    double im_z = 0.0;        // the probed line Im z = ((2m+1)π/(√3 L))³
    double c_fit = 0.0;       // least-squares decay rate of ln|detQ| vs |z|^{1/3}
    double min_abs = 0.0;     // raw min |det Q| over the samples
    double floor_scaled = 0.; // min |det Q| · e^{c_fit |z|^{1/3}}
    int n_samples = 0;
};

// Sample |det Q| along the line Im z = ((2m+1)π/(√3 L))³ for
// Re z ∈ [−10·Im z, 10·Im z] and report a fitted exponential floor:
// the line threads between spectrum points, so the scaled minimum must stay
// strictly positive.
inline LineBoundReport detq_line_bound(double L, int m, int n_samples = 201) {
    if (!(L > 0.0)) throw std::domain_error("detq_line_bound: L must be positive");
    if (m < 0) throw std::domain_error("detq_line_bound: m must be >= 0");
    if (n_samples < 8) throw std::domain_error("detq_line_bound: too few samples");
    LineBoundReport rep;
    rep.L = L;
    rep.m = m;
    rep.n_samples = n_samples;
    const double b = (2.0 * m + 1.0) * 3.14159265358979323846 /
                     (std::sqrt(3.0) * L);
    rep.im_z = b * b * b;
    std::vector<double> x13(n_samples), lnq(n_samples);
    double min_abs = 1e300;
    for (int i = 0; i < n_samples; ++i) {
        const double re = -10.0 * rep.im_z +
                          20.0 * rep.im_z * i / (n_samples - 1.0);
        const cplx z(re, rep.im_z);
        const auto rt = solve_cubic(z);
        const double aq = std::abs(detail::detq_sum(rt.lambda, L));
        min_abs = std::min(min_abs, aq);
        x13[i] = std::pow(std::abs(z), 1.0 / 3.0);
        lnq[i] = std::log(std::max(aq, 1e-300));
    }
    // ln|detQ| ≈ a − c |z|^{1/3} by least squares.
    double mx = 0, my = 0;
    for (int i = 0; i < n_samples; ++i) { mx += x13[i]; my += lnq[i]; }
    mx /= n_samples; my /= n_samples;
    double num = 0, den = 0;
    for (int i = 0; i < n_samples; ++i) {
        num += (x13[i] - mx) * (lnq[i] - my);
        den += (x13[i] - mx) * (x13[i] - mx);
    }
    rep.c_fit = -num / den;
    rep.min_abs = min_abs;
    double fl = 1e300;
    for (int i = 0; i < n_samples; ++i)
        fl = std::min(fl, std::exp(lnq[i] + rep.c_fit * x13[i]));
    rep.floor_scaled = fl;
    return rep;
}

// ---- single-valuedness around the branch points ---------------------------

struct MonodromyReport {
    cplx center;
    double radius = 0.0;
    double defect_G = 0.0;    // |G after one tracked loop − G at start| / mean|G|
    double defect_H = 0.0;
    double max_jump_G = 0.0;  // largest adjacent-sample jump / mean|G|
    double max_jump_H = 0.0;
};

// Walk a circle around `center` keeping the root labelling continuous from
// sample to sample (the individual roots undergo a transposition around a
// branch point, flipping the signs of P, Ξ and permuting det Q's terms), and
// verify that the ratios G = P/Ξ, H = detQ/Ξ return to their initial values:
// a genuine monodromy test that G and H are single-valued.
inline MonodromyReport monodromy_defect(cplx center, double radius, double L,
                                        int n_pts = 256) {
    if (!(radius > 0.0)) throw std::domain_error("monodromy_defect: radius > 0");
    MonodromyReport rep;
    rep.center = center;
    rep.radius = radius;
    std::array<cplx, 3> prev{};
    cplx g_start, h_start, g_prev, h_prev;
    double sum_g = 0.0, sum_h = 0.0;
    std::vector<cplx> gs, hs;
    for (int i = 0; i <= n_pts; ++i) {       // i = n_pts closes the loop
        const double th = 2.0 * 3.14159265358979323846 * i / n_pts;
        const cplx z = center + std::polar(radius, th);
        auto rt = solve_cubic(z);
        std::array<cplx, 3> cur = rt.lambda;
        if (i > 0) {
            // Re-label to stay continuous with the previous sample.
            std::array<int, 3> perm = {0, 1, 2}, best_perm = {0, 1, 2};
            double best = 1e300;
            std::sort(perm.begin(), perm.end());
            do {
                double d = 0.0;
                for (int k = 0; k < 3; ++k)
                    d = std::max(d, std::abs(cur[perm[k]] - prev[k]));
                if (d < best) { best = d; best_perm = perm; }
            } while (std::next_permutation(perm.begin(), perm.end()));
            std::array<cplx, 3> relab;
            for (int k = 0; k < 3; ++k) relab[k] = cur[best_perm[k]];
            cur = relab;
        }
        prev = cur;
        const cplx xi = detail::vandermonde(cur);
        const cplx g = detail::p_sum(cur, L) / xi;
        const cplx h = detail::detq_sum(cur, L) / xi;
        if (i == 0) { g_start = g; h_start = h; }
        else {
            rep.max_jump_G = std::max(rep.max_jump_G, std::abs(g - g_prev));
            rep.max_jump_H = std::max(rep.max_jump_H, std::abs(h - h_prev));
        }
        g_prev = g; h_prev = h;
        if (i < n_pts) { sum_g += std::abs(g); sum_h += std::abs(h); }
    }
    const double mg = std::max(sum_g / n_pts, 1e-300);
    const double mh = std::max(sum_h / n_pts, 1e-300);
    rep.defect_G = std::abs(g_prev - g_start) / mg;
    rep.defect_H = std::abs(h_prev - h_start) / mh;
    rep.max_jump_G /= mg;
    rep.max_jump_H /= mh;
    return rep;
}

} // namespace kdvlab
