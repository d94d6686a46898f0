/*
 * critical_lengths.hpp — critical lengths, the resonant pair data and the
 * obstruction constant E.
 *
 * A length L = 2π√((k²+kl+l²)/3) (k ≥ l ≥ 1 integers) is critical: the
 * linearised equation has pure-imaginary spectrum at the frequency
 *
 *   p = (2k+l)(k−l)(2l+k) / (3√3 (k²+kl+l²)^{3/2}),
 *
 * carried by the arithmetic ladder of cubic roots
 *
 *   η₁ = −2πi(2k+l)/(3L),  η₂ = η₁ + 2πik/L,  η₃ = η₂ + 2πil/L,
 *
 * which solve η³ + η = ip and satisfy e^{η₁L} = e^{η₂L} = e^{η₃L}.  The mode
 * φ(x) = Σ (η_{j+1}−η_j) e^{η_{j+2}x} vanishes with its derivative at both
 * ends; Ψ = Re(conj(E) φ(x) e^{−ipt}) solves the linear equation with all
 * four boundary traces zero.  The obstruction constant is
 *
 *   E = ⅓ (e^{η₁L}−1) (−⅔ Σ η²_{j+2}(η_{j+1}−η_j) − (ip/3) Σ (η_{j+1}−η_j)/η_{j+2})
 *     = (8π³/(3L³)) (e^{η₁L}−1) · i·kl(k+l)         (closed form)
 *
 * and is nonzero exactly when 2k+l ∉ 3ℕ.  The kernel B(z,x) pairs the
 * transfer factors at z and z−p against φ_x; ∫₀ᴸ B dx = E|z|^{−4/3} + O(|z|^{−5/3}).
 */

#pragma once

#include <kdvlab/complex_cubic.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvlab {

inline constexpr double kl_pi = 3.14159265358979323846;

struct CriticalPair {
    int k = 0, l = 0;               // k ≥ l ≥ 1
    double L = 0.0;                 // critical length
    double p = 0.0;                 // eigenfrequency (reported sign: +)
    std::array<cplx, 3> eta{};      // pure-imaginary ladder roots
    cplx E;                         // obstruction constant
    double E1 = 0.0, E2 = 0.0;      // Re E, Im E
    bool obstruction_applies = false;  // 2k+l ∉ 3ℕ
    int dimM = 1;                   // # of (k',l') sharing k²+kl+l²
};

enum class EMethod { direct, closed_form };

// E from the pair data; `direct` evaluates the defining η-sums, `closed_form`
// the factored expression.  Direct mode requires η_j ≠ 0 (fails for k = l).
inline cplx compute_E(const CriticalPair &pr, EMethod method) {
    const auto &e = pr.eta;
    const cplx phase = std::exp(e[0] * pr.L) - 1.0;
    if (method == EMethod::closed_form) {
        const double kk = pr.k, ll = pr.l;
        return (8.0 * std::pow(kl_pi, 3) / (3.0 * std::pow(pr.L, 3))) * phase *
               cplx(0.0, 1.0) * (kk * ll * (kk + ll));
    }
    for (int j = 0; j < 3; ++j)
        if (std::abs(e[j]) < 1e-14)
            throw std::domain_error("compute_E: eta_" + std::to_string(j + 1) +
                                    " = 0, direct sums undefined");
    cplx s2 = 0.0, sq = 0.0;
    for (int j = 0; j < 3; ++j) {
        const cplx diff = e[(j + 1) % 3] - e[j];
        s2 += e[(j + 2) % 3] * e[(j + 2) % 3] * diff;
        sq += diff / e[(j + 2) % 3];
    }
    return (1.0 / 3.0) * phase *
           (-(2.0 / 3.0) * s2 - cplx(0.0, 1.0) * (pr.p / 3.0) * sq);
}

// Build the full pair record for (k, l); dimM is filled by enumerate_pairs
// (or by the caller) — defaults to the count over k'²+k'l'+l'² = k²+kl+l².
inline CriticalPair make_pair(int k, int l) {
    if (k < l || l < 1) throw std::domain_error("make_pair: need k >= l >= 1");
    CriticalPair pr;
    pr.k = k;
    pr.l = l;
    const double s = static_cast<double>(k) * k + static_cast<double>(k) * l +
                     static_cast<double>(l) * l;
    pr.L = 2.0 * kl_pi * std::sqrt(s / 3.0);
    pr.p = (2.0 * k + l) * (static_cast<double>(k) - l) * (2.0 * l + k) /
           (3.0 * std::sqrt(3.0) * std::pow(s, 1.5));
    pr.eta[0] = cplx(0.0, -2.0 * kl_pi * (2.0 * k + l) / (3.0 * pr.L));
    pr.eta[1] = pr.eta[0] + cplx(0.0, 2.0 * kl_pi * k / pr.L);
    pr.eta[2] = pr.eta[1] + cplx(0.0, 2.0 * kl_pi * l / pr.L);
    pr.obstruction_applies = ((2 * k + l) % 3) != 0;
    int count = 0;
    const int si = 2 * k * k + k * l;  // bound k' by k'² ≤ s
    (void)si;
    for (int kp = 1; kp * kp <= static_cast<int>(s); ++kp)
        for (int lp = 1; lp <= kp; ++lp)
            if (kp * kp + kp * lp + lp * lp == static_cast<int>(s)) ++count;
    pr.dimM = count;
    pr.E = compute_E(pr, EMethod::closed_form);
    pr.E1 = pr.E.real();
    pr.E2 = pr.E.imag();
    return pr;
}

// All pairs with k²+kl+l² ≤ s_max, k ≥ l ≥ 1, ordered by (s, k).
inline std::vector<CriticalPair> enumerate_pairs(int s_max) {
    if (s_max < 3) throw std::domain_error("enumerate_pairs: s_max >= 3");
    std::vector<CriticalPair> out;
    for (int k = 1; k * k <= s_max; ++k)
        for (int l = 1; l <= k; ++l)
            if (k * k + k * l + l * l <= s_max) out.push_back(make_pair(k, l));
    std::sort(out.begin(), out.end(), [](const CriticalPair &a, const CriticalPair &b) {
        const int sa = a.k * a.k + a.k * a.l + a.l * a.l;
        const int sb = b.k * b.k + b.k * b.l + b.l * b.l;
        if (sa != sb) return sa < sb;
        return a.k < b.k;
    });
    return out;
}

// Pair with η_j → −η_j, p → −p (conjugate-reflection partner; used by the
// z → −z symmetry checks of the kernel integral).
inline CriticalPair reflect(const CriticalPair &pr) {
    CriticalPair out = pr;
    out.p = -pr.p;
    for (int j = 0; j < 3; ++j) out.eta[j] = -pr.eta[j];
    out.E = std::conj(pr.E);
    out.E1 = out.E.real();
    out.E2 = out.E.imag();
    return out;
}

// ---- the resonant field -----------------------------------------------------

// Exact evaluators for φ and Ψ; grid sampling is always derived from these,
// so the boundary identities hold to machine precision.
struct PsiField {
    CriticalPair pair;

    explicit PsiField(const CriticalPair &p) : pair(p) {}

    // n-th derivative of φ at x (n = 0 is φ itself).
    cplx phi_deriv(double x, int n) const {
        cplx s = 0.0;
        for (int j = 0; j < 3; ++j) {
            const cplx e = pair.eta[(j + 2) % 3];
            cplx w = pair.eta[(j + 1) % 3] - pair.eta[j];
            for (int m = 0; m < n; ++m) w *= e;
            s += w * std::exp(e * x);
        }
        return s;
    }
    cplx phi(double x) const { return phi_deriv(x, 0); }
    cplx phi_x(double x) const { return phi_deriv(x, 1); }

    double xi1(double t, double x) const {
        return (phi(x) * std::exp(cplx(0.0, -pair.p * t))).real();
    }
    double xi2(double t, double x) const {
        return (phi(x) * std::exp(cplx(0.0, -pair.p * t))).imag();
    }

    // Ψ = E1 ξ1 + E2 ξ2 = Re(conj(E) φ e^{−ipt}) and its derivatives.
    double Psi(double t, double x) const {
        return (std::conj(pair.E) * phi(x) * std::exp(cplx(0.0, -pair.p * t))).real();
    }
    double Psi_x(double t, double x) const {
        return (std::conj(pair.E) * phi_deriv(x, 1) *
                std::exp(cplx(0.0, -pair.p * t))).real();
    }
    double Psi_t(double t, double x) const {
        return (cplx(0.0, -pair.p) * std::conj(pair.E) * phi(x) *
                std::exp(cplx(0.0, -pair.p * t))).real();
    }
    // PDE residual Ψ_t + Ψ_x + Ψ_xxx from the exact evaluators.
    double pde_residual(double t, double x) const {
        const cplx core = std::conj(pair.E) * std::exp(cplx(0.0, -pair.p * t));
        const cplx val = cplx(0.0, -pair.p) * phi(x) + phi_deriv(x, 1) +
                         phi_deriv(x, 3);
        return (core * val).real();
    }

    // Samples of Ψ(t, ·) at the interior nodes of an N-cell grid on [0, L].
    std::vector<double> sample_Psi(double t, int N) const {
        std::vector<double> v(N - 1);
        const double h = pair.L / N;
        for (int i = 1; i < N; ++i) v[i - 1] = Psi(t, i * h);
        return v;
    }
    std::vector<double> sample_Psi_x(double t, int N) const {
        std::vector<double> v(N - 1);
        const double h = pair.L / N;
        for (int i = 1; i < N; ++i) v[i - 1] = Psi_x(t, i * h);
        return v;
    }
};

// ---- uncontrollable-direction basis ----------------------------------------

struct MBasis {
    std::vector<std::vector<double>> vecs;  // orthonormal in h-weighted L²
    int dim = 0;
    bool reduced = false;                   // true if Re φ, Im φ were dependent
};

// Gram–Schmidt on sampled Re φ, Im φ at the interior nodes of an N-cell grid.
inline MBasis m_basis(const CriticalPair &pr, int N) {
    if (N < 8) throw std::domain_error("m_basis: grid too coarse");
    PsiField psi(pr);
    const double h = pr.L / N;
    std::vector<double> re(N - 1), im(N - 1);
    for (int i = 1; i < N; ++i) {
        const cplx v = psi.phi(i * h);
        re[i - 1] = v.real();
        im[i - 1] = v.imag();
    }
    auto dot = [h](const std::vector<double> &a, const std::vector<double> &b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s * h;
    };
    MBasis mb;
    // Order by magnitude so a vanishing component (e.g. Re φ ≡ 0 for k = l)
    // never poisons the first direction.
    std::vector<std::vector<double>> cand = {re, im};
    if (dot(im, im) > dot(re, re)) std::swap(cand[0], cand[1]);
    const double scale = std::sqrt(dot(cand[0], cand[0]));
    for (auto &c : cand) {
        std::vector<double> v = c;
        for (const auto &b : mb.vecs) {
            const double pr_ = dot(v, b);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= pr_ * b[i];
        }
        const double n = std::sqrt(dot(v, v));
        if (n < 1e-8 * std::max(scale, 1.0)) {
            mb.reduced = true;
            continue;
        }
        for (auto &x : v) x /= n;
        mb.vecs.push_back(std::move(v));
    }
    mb.dim = static_cast<int>(mb.vecs.size());
    return mb;
}

// ---- kernel integral --------------------------------------------------------

namespace detail {

// One transfer factor  Σ_j (e^{λ_{j+1}L} − e^{λ_jL}) e^{λ_{j+2}x}
//                     / Σ_j (λ_{j+1} − λ_j) e^{−λ_{j+2}L},
// evaluated with explicit max-exponent factoring so that no individual
// exponential overflows (needed for |z| up to 1e7 and beyond).
struct TransferFactor {
    std::array<cplx, 3> l;
    double L = 0.0;
    cplx den_scaled;      // denominator · e^{−m_den}
    double m_den = 0.0;   // max real part of denominator exponents

    TransferFactor(const std::array<cplx, 3> &lam, double Len) : l(lam), L(Len) {
        m_den = -1e300;
        for (int j = 0; j < 3; ++j)
            m_den = std::max(m_den, (-l[(j + 2) % 3] * L).real());
        den_scaled = 0.0;
        for (int j = 0; j < 3; ++j)
            den_scaled += (l[(j + 1) % 3] - l[j]) *
                          std::exp(-l[(j + 2) % 3] * L - m_den);
    }

    cplx eval(double x) const {
        // Numerator exponents λ_a L + λ_b x over the six terms.
        double m_num = -1e300;
        for (int j = 0; j < 3; ++j) {
            m_num = std::max(m_num, (l[(j + 1) % 3] * L + l[(j + 2) % 3] * x).real());
            m_num = std::max(m_num, (l[j] * L + l[(j + 2) % 3] * x).real());
        }
        cplx num = 0.0;
        for (int j = 0; j < 3; ++j) {
            num += std::exp(l[(j + 1) % 3] * L + l[(j + 2) % 3] * x - m_num) -
                   std::exp(l[j] * L + l[(j + 2) % 3] * x - m_num);
        }
        return num / den_scaled * std::exp(cplx(m_num - m_den, 0.0));
    }
};

} // namespace detail

// B(z, x): product of the transfer factors at z and (conjugated) z − p,
// weighted by φ_x.  For complex z the tilde factor is the analytic
// continuation conj(λ_j(conj(z) − p)) of its real-axis values, so that
// z ↦ B(z, x) stays holomorphic (circle averages reproduce the value at
// the center near removable points).
struct BKernel {
    detail::TransferFactor f1, f2;
    PsiField psi;

    BKernel(cplx z, const CriticalPair &pr)
        : f1(solve_cubic(z).lambda, pr.L),
          f2(tilde_roots(std::conj(z), pr.p).lambda, pr.L),
          psi(pr) {}

    cplx operator()(double x) const {
        return f1.eval(x) * f2.eval(x) * psi.phi_x(x);
    }
};

namespace detail {

template <class F>
cplx adaptive_simpson(const F &f, double a, double b, cplx fa, cplx fm, cplx fb,
                      cplx whole, double tol, int depth, double &err_out) {
    const double m = 0.5 * (a + b);
    const cplx fl = f(0.5 * (a + m));
    const cplx fr = f(0.5 * (m + b));
    const cplx left = (m - a) / 6.0 * (fa + 4.0 * fl + fm);
    const cplx right = (b - m) / 6.0 * (fm + 4.0 * fr + fb);
    const cplx delta = left + right - whole;
    // Roundoff floor: once the correction is at relative machine level,
    // further bisection only accumulates noise.
    const double floor_ = 4e-15 * (std::abs(left) + std::abs(right));
    if (depth <= 0 || std::abs(delta) < 15.0 * std::max(tol, floor_)) {
        err_out += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, fl, fm, left, 0.5 * tol, depth - 1, err_out) +
           adaptive_simpson(f, m, b, fm, fr, fb, right, 0.5 * tol, depth - 1, err_out);
}

template <class F>
cplx integrate_adaptive(const F &f, double a, double b, double tol, int n_panels,
                        double &err_out) {
    cplx total = 0.0;
    err_out = 0.0;
    const double w = (b - a) / n_panels;
    for (int i = 0; i < n_panels; ++i) {
        const double x0 = a + i * w, x1 = x0 + w, xm = 0.5 * (x0 + x1);
        const cplx fa = f(x0), fm = f(xm), fb = f(x1);
        const cplx whole = w / 6.0 * (fa + 4.0 * fm + fb);
        total += adaptive_simpson(f, x0, x1, fa, fm, fb, whole,
                                  tol / n_panels, 24, err_out);
    }
    return total;
}

} // namespace detail

// ∫₀ᴸ B(z, x) dx by panel-seeded adaptive Simpson.  Default tolerance scales
// with the expected |z|^{−4/3} magnitude of the answer.  Pass quad_tol ≤ 0
// for the default.  Throws if the achieved error estimate misses the target
// by more than 10×.  Near the removable points z ∈ {−p, 0, p, 2p} (one of
// the transfer denominators vanishes there, making the direct 0/0 evaluation
// catastrophically noisy) the value is recovered by an 8-point circle
// average, exact for the holomorphic integrand up to O(r⁸).
inline cplx integral_B(cplx z, const CriticalPair &pr, double quad_tol = -1.0) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::domain_error("integral_B: non-finite z");
    if (quad_tol <= 0.0)
        quad_tol = 1e-10 * std::pow(std::max(std::abs(z), 1.0), -4.0 / 3.0);
    double d_sing = std::abs(z);
    for (double s : {-pr.p, pr.p, 2.0 * pr.p})
        d_sing = std::min(d_sing, std::abs(z - s));
    if (d_sing < 1e-4) {
        const double r = 1e-3;
        cplx acc = 0.0;
        for (int q = 0; q < 8; ++q)
            acc += integral_B(z + r * std::exp(cplx(0.0, 2.0 * kl_pi * q / 8.0)),
                              pr, quad_tol);
        return acc / 8.0;
    }
    BKernel B(z, pr);
    const double freq = 2.0 * std::pow(std::abs(z) + 1.0, 1.0 / 3.0) + std::abs(pr.p);
    const int n_panels =
        std::max(16, static_cast<int>(std::ceil(1.6 * freq * pr.L)));
    double err = 0.0;
    const cplx val = detail::integrate_adaptive(B, 0.0, pr.L, quad_tol, n_panels, err);
    // Genuine non-convergence only: a result limited by double-precision
    // roundoff (relative ~1e-12) is accepted even when the |z|-scaled
    // absolute target sits below the machine floor.
    if (err > 10.0 * quad_tol && err > 1e-12 * std::abs(val))
        throw std::runtime_error("integral_B: quadrature achieved " +
                                 std::to_string(err) + " vs requested " +
                                 std::to_string(quad_tol));
    return val;
}

// ---- CSV export -------------------------------------------------------------

inline void write_pairs_csv(std::ostream &os, const std::vector<CriticalPair> &pairs) {
    os << "k,l,L,p,Re E,Im E,dimM,obstruction_applies\n";
    char buf[256];
    for (const auto &pr : pairs) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                      pr.k, pr.l, pr.L, pr.p, pr.E1, pr.E2, pr.dimM,
                      pr.obstruction_applies ? 1 : 0);
        os << buf;
    }
}

} // namespace kdvlab
