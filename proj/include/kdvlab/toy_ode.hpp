/*
 * toy_ode.hpp — the three-dimensional model system ẏ₁ = u, ẏ₂ = y₃,
 * ẏ₃ = −y₂ + 2y₁u: RK4 integration, the exact quadrature formulas for the
 * terminal state, and the small-time obstruction checks (y₂ ≥ 0 up to π/2,
 * y₃ ≤ 0 up to π for loops) with empirical coercivity constants and an
 * optimizer probing for sign changes past the threshold.
 */

#pragma once

#include <kdvlab/control_tools.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

namespace kdvlab {

struct ToyState {
    double y1 = 0.0, y2 = 0.0, y3 = 0.0;
    double t = 0.0;
};

// RK4 from the origin.  The control is read through linear interpolation of
// its samples, so dt need not match the sampling step.
inline ToyState toy_simulate(const ControlSignal &u, double T, double dt) {
    if (!(T > 0.0)) throw std::domain_error("toy_simulate: T must be > 0");
    if (!(dt > 0.0) || dt > 1e-3 * T)
        throw std::domain_error("toy_simulate: need 0 < dt <= 1e-3*T");
    const long long steps = std::llround(T / dt);
    const double h = T / static_cast<double>(steps);
    auto rhs = [&](double t, const double y[3], double out[3]) {
        const double ut = u.value(std::min(t, u.T));
        out[0] = ut;
        out[1] = y[2];
        out[2] = -y[1] + 2.0 * y[0] * ut;
    };
    double y[3] = {0.0, 0.0, 0.0};
    double k1[3], k2[3], k3[3], k4[3], tmp[3];
    for (long long m = 0; m < steps; ++m) {
        const double t = m * h;
        rhs(t, y, k1);
        for (int i = 0; i < 3; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, tmp, k2);
        for (int i = 0; i < 3; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, tmp, k3);
        for (int i = 0; i < 3; ++i) tmp[i] = y[i] + h * k3[i];
        rhs(t + h, tmp, k4);
        for (int i = 0; i < 3; ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return ToyState{y[0], y[1], y[2], T};
}

// Exact terminal values by quadrature: y₁ by cumulative trapezoid of u, then
// y₂(T) = ∫₀^T cos(T−t) y₁²(t) dt and y₃(T) = y₁(T)² − ∫₀^T sin(T−t) y₁²(t) dt,
// both on the sampling grid of u (trapezoid).
inline std::pair<double, double> toy_exact(const ControlSignal &u, double T) {
    const std::size_t n = u.samples.size();
    const double dt = u.dt;
    const long long steps = std::llround(T / dt);
    if (steps < 1 || static_cast<std::size_t>(steps) >= n + 1)
        throw std::domain_error("toy_exact: T must lie on the sampling grid of u");
    std::vector<double> y1(static_cast<std::size_t>(steps) + 1, 0.0);
    for (long long m = 1; m <= steps; ++m)
        y1[static_cast<std::size_t>(m)] =
            y1[static_cast<std::size_t>(m - 1)] +
            0.5 * dt *
                (u.samples[static_cast<std::size_t>(m - 1)] +
                 u.samples[static_cast<std::size_t>(m)]);
    double i_cos = 0.0, i_sin = 0.0;
    for (long long m = 0; m <= steps; ++m) {
        const double w = (m == 0 || m == steps) ? 0.5 : 1.0;
        const double q = y1[static_cast<std::size_t>(m)] *
                         y1[static_cast<std::size_t>(m)];
        const double a = T - m * dt;
        i_cos += w * std::cos(a) * q;
        i_sin += w * std::sin(a) * q;
    }
    i_cos *= dt;
    i_sin *= dt;
    const double yT = y1[static_cast<std::size_t>(steps)];
    return {i_cos, yT * yT - i_sin};
}

struct ToyRecord {
    int sample = 0;
    double y2 = 0.0;       // from the free family
    double ratio2 = 0.0;   // y2 / ‖u‖²_{H^{−1}}
    double y3 = 0.0;       // from the mean-free family (y1(T) = 0)
    double ratio3 = 0.0;   // −y3 / ‖u‖²_{H^{−2}}
};

struct ToyReport {
    double T = 0.0;
    int n_samples = 0;
    std::uint64_t seed = 0;
    std::vector<ToyRecord> records;
    int y2_violations = 0;     // y2 < 0 with T <= pi/2
    int y3_violations = 0;     // y3 > 0 with T <= pi
    double delta2_hat = 0.0;   // min y2 / ‖u‖²_{H^{−1}}
    double delta3_hat = 0.0;   // min −y3 / ‖u‖²_{H^{−2}}
    bool optimizer_ran = false;      // only past T = pi
    bool positive_y3_found = false;  // optimizer located y3(T) > 0
    double best_y3 = 0.0;

    void write_csv(std::ostream &os) const {
        os << "sample,y2,ratio2,y3,ratio3\n";
        char buf[256];
        for (const auto &r : records) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n",
                          r.sample, r.y2, r.ratio2, r.y3, r.ratio3);
            os << buf;
        }
    }
};

namespace detail {

// Random sum of 2–4 bump atoms on (0, T), n samples.
inline ControlSignal toy_random_control(std::mt19937_64 &rng, double T, int n) {
    std::uniform_int_distribution<int> Un(2, 4);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int atoms = Un(rng);
    std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
    const double dt = T / (n - 1);
    for (int a = 0; a < atoms; ++a) {
        const double w = T * (0.08 + 0.22 * U(rng));
        const double c = w * 1.05 + U(rng) * (T - 2.1 * w);
        double amp = 0.3 + 0.7 * U(rng);
        if (U(rng) < 0.5) amp = -amp;
        for (int i = 0; i < n; ++i) {
            const double r = (i * dt - c) / w;
            if (std::abs(r) < 1.0)
                acc[static_cast<std::size_t>(i)] +=
                    amp * std::exp(1.0 - 1.0 / (1.0 - r * r));
        }
    }
    return ControlSignal(std::move(acc), T);
}

// y₁(T) = 0 by mean subtraction (a linear constraint preserving smoothness
// up to the endpoints of the window).
inline ControlSignal toy_mean_free(const ControlSignal &u) {
    double mean = 0.0;
    const std::size_t n = u.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        mean += w * u.samples[i];
    }
    mean /= static_cast<double>(n - 1);
    auto s = u.samples;
    for (auto &v : s) v -= mean;
    return ControlSignal(std::move(s), u.T);
}

} // namespace detail

// Random sampling of the two sign inequalities plus, past T = π, a projected
// gradient search for a mean-free control with y₃(T) > 0 (64 coefficients,
// 200 iterations, finite-difference gradient on the exact quadratures).
inline ToyReport toy_obstruction_check(double T, int n_samples,
                                       std::uint64_t seed) {
    if (!(T > 0.0)) throw std::domain_error("toy_obstruction_check: T must be > 0");
    if (n_samples < 1)
        throw std::domain_error("toy_obstruction_check: n_samples < 1");
    ToyReport rep;
    rep.T = T;
    rep.n_samples = n_samples;
    rep.seed = seed;
    const int n = 1001;
    bool first = true;
    for (int s = 0; s < n_samples; ++s) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(s));
        ToyRecord rec;
        rec.sample = s;
        auto u = detail::toy_random_control(rng, T, n);
        auto [y2, y3f] = toy_exact(u, T);
        (void)y3f;
        rec.y2 = y2;
        const double h1 = sobolev_norm(u, -1.0, 16);
        rec.ratio2 = y2 / (h1 * h1);
        auto um = detail::toy_mean_free(u);
        auto [y2m, y3] = toy_exact(um, T);
        (void)y2m;
        rec.y3 = y3;
        const double h2 = sobolev_norm(um, -2.0, 16);
        rec.ratio3 = -y3 / (h2 * h2);
        if (T <= kl_pi / 2.0 + 1e-12 && y2 < 0.0) ++rep.y2_violations;
        if (T <= kl_pi + 1e-12 && y3 > 0.0) ++rep.y3_violations;
        if (first || rec.ratio2 < rep.delta2_hat) rep.delta2_hat = rec.ratio2;
        if (first || rec.ratio3 < rep.delta3_hat) rep.delta3_hat = rec.ratio3;
        first = false;
        rep.records.push_back(rec);
    }

    if (T > kl_pi) {
        rep.optimizer_ran = true;
        // 64 hat-function coefficients, mean-projected; objective y3(T).
        const int nc = 64;
        const int ns = 2001;
        auto assemble = [&](const std::vector<double> &c) {
            std::vector<double> s(static_cast<std::size_t>(ns), 0.0);
            for (int i = 0; i < ns; ++i) {
                const double x = static_cast<double>(i) / (ns - 1) * (nc - 1);
                const int j = std::min(static_cast<int>(x), nc - 2);
                const double f = x - j;
                s[static_cast<std::size_t>(i)] =
                    (1.0 - f) * c[static_cast<std::size_t>(j)] +
                    f * c[static_cast<std::size_t>(j) + 1];
            }
            return detail::toy_mean_free(ControlSignal(std::move(s), T));
        };
        auto objective = [&](const std::vector<double> &c) {
            return toy_exact(assemble(c), T).second;
        };
        std::mt19937_64 rng(seed ^ 0x5bf03635ULL);
        std::normal_distribution<double> G(0.0, 1.0);
        std::vector<double> c(static_cast<std::size_t>(nc));
        for (auto &v : c) v = G(rng);
        double f0 = objective(c);
        double step = 0.2;
        std::vector<double> grad(static_cast<std::size_t>(nc));
        for (int it = 0; it < 200; ++it) {
            const double eps = 1e-6;
            for (int j = 0; j < nc; ++j) {
                auto cp = c;
                cp[static_cast<std::size_t>(j)] += eps;
                grad[static_cast<std::size_t>(j)] = (objective(cp) - f0) / eps;
            }
            double gn = 0.0;
            for (double gv : grad) gn += gv * gv;
            gn = std::sqrt(gn);
            if (gn < 1e-14) break;
            auto cn = c;
            for (int j = 0; j < nc; ++j)
                cn[static_cast<std::size_t>(j)] +=
                    step * grad[static_cast<std::size_t>(j)] / gn;
            // Keep the iterate on the unit sphere: y3 is 2-homogeneous, so the
            // scale is irrelevant and the normalization avoids runaway growth.
            double cnn = 0.0;
            for (double v : cn) cnn += v * v;
            cnn = std::sqrt(cnn / nc);
            for (auto &v : cn) v /= cnn;
            const double f1 = objective(cn);
            if (f1 > f0) {
                c = cn;
                f0 = f1;
                step = std::min(step * 1.3, 1.0);
            } else {
                step *= 0.5;
                if (step < 1e-10) break;
            }
        }
        rep.best_y3 = f0;
        rep.positive_y3_found = f0 > 0.0;
    }
    return rep;
}

} // namespace kdvlab
