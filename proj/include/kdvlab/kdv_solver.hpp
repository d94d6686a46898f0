/*
 * kdv_solver.hpp — time-domain solvers on [0, L] with homogeneous Dirichlet
 * data and Neumann control at the right end:
 *
 *   linear      y_t + y_x + y_xxx = f,            y_x(t, L) = u(t)
 *   nonlinear   y_t + y_x + y_xxx + y y_x = 0,    y_x(t, L) = u(t)
 *
 * Interior unknowns y_1..y_{N-1}; first derivative central, third derivative
 * central 5-point with the right ghost value y_{N+1} = y_{N-1} + 2h u(t)
 * (eliminating the Neumann datum) and a one-sided first-order closure at
 * i = 1.  Crank–Nicolson stepping with a pentadiagonal LU solve per step;
 * the nonlinearity ½(y²)_x is advanced by fixed-point corrections.
 *
 * Also: an exact per-mode exponential integrator for the periodic
 * KdV–Burgers equation y_t + 4y_x + y_xxx − 3y_xx = f (mode n evolves by
 * e^{−(i(4n−n³)+3n²)(t−τ)}), and frequency-response utilities tying the
 * time-domain solver to the spectral transfer formulas.
 */

#pragma once

#include <kdvlab/complex_cubic.hpp>
#include <kdvlab/control_signal.hpp>
#include <kdvlab/critical_lengths.hpp>
#include <kdvlab/spectral.hpp>

#include <lapacke.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvlab {

// ---- grid and trajectory ----------------------------------------------------

struct Grid {
    double L = 0.0;
    int N = 0;        // cell count; interior unknowns 1..N-1
    double h = 0.0;
    double dt = 0.0;
    double T = 0.0;

    Grid() = default;
    Grid(double len, int cells, double step, double horizon)
        : L(len), N(cells), dt(step), T(horizon) {
        if (!(len > 0.0) || cells < 32 || !(step > 0.0) || !(horizon >= step))
            throw std::domain_error("Grid: need L > 0, N >= 32, 0 < dt <= T");
        h = L / N;
    }
    int steps() const {
        const auto n = static_cast<int>(std::llround(T / dt));
        return n < 1 ? 1 : n;
    }
};

struct Trajectory {
    Grid grid;
    bool periodic = false;
    bool compat_warning = false;           // u(0) vs y0 right-derivative mismatch
    std::vector<double> times;
    std::vector<std::vector<double>> states;  // interior values (full row if periodic)
    std::vector<double> trace_left;           // y_x(t, 0)
    std::vector<double> trace_right;          // y_x(t, L)

    // One-sided second-order derivative traces from interior values.
    static double left_trace_of(const std::vector<double> &y, double h) {
        return (4.0 * y.front() - y[1]) / (2.0 * h);
    }
    static double right_trace_of(const std::vector<double> &y, double h) {
        const std::size_t n = y.size();
        return (y[n - 2] - 4.0 * y[n - 1]) / (2.0 * h);
    }

    void write_csv(std::ostream &os) const {
        char buf[64];
        os << "t";
        const int nodes = static_cast<int>(states.empty() ? 0 : states[0].size());
        for (int i = 0; i < nodes; ++i) {
            const double x = periodic ? i * grid.h : (i + 1) * grid.h;
            std::snprintf(buf, sizeof buf, ",x=%.12g", x);
            os << buf;
        }
        os << "\n";
        for (std::size_t n = 0; n < times.size(); ++n) {
            std::snprintf(buf, sizeof buf, "%.12g", times[n]);
            os << buf;
            for (double v : states[n]) {
                std::snprintf(buf, sizeof buf, ",%.12g", v);
                os << buf;
            }
            os << "\n";
        }
    }

    void write_binary(std::ostream &os) const {
        os.write("KDVTRAJ1", 8);
        const std::int64_t nt = static_cast<std::int64_t>(times.size());
        const std::int64_t nx = nt ? static_cast<std::int64_t>(states[0].size()) : 0;
        os.write(reinterpret_cast<const char *>(&nt), 8);
        os.write(reinterpret_cast<const char *>(&nx), 8);
        os.write(reinterpret_cast<const char *>(times.data()), nt * 8);
        for (const auto &row : states)
            os.write(reinterpret_cast<const char *>(row.data()), nx * 8);
        os.write(reinterpret_cast<const char *>(trace_left.data()), nt * 8);
        os.write(reinterpret_cast<const char *>(trace_right.data()), nt * 8);
    }

    static Trajectory read_binary(std::istream &is) {
        char magic[8];
        is.read(magic, 8);
        if (!is || std::memcmp(magic, "KDVTRAJ1", 8) != 0)
            throw std::runtime_error("Trajectory: bad magic");
        std::int64_t nt = 0, nx = 0;
        is.read(reinterpret_cast<char *>(&nt), 8);
        is.read(reinterpret_cast<char *>(&nx), 8);
        if (!is || nt < 0 || nx < 0 || nt > (1 << 28) || nx > (1 << 28))
            throw std::runtime_error("Trajectory: bad dims");
        Trajectory tr;
        tr.times.resize(nt);
        is.read(reinterpret_cast<char *>(tr.times.data()), nt * 8);
        tr.states.assign(nt, std::vector<double>(nx));
        for (auto &row : tr.states)
            is.read(reinterpret_cast<char *>(row.data()), nx * 8);
        tr.trace_left.resize(nt);
        tr.trace_right.resize(nt);
        is.read(reinterpret_cast<char *>(tr.trace_left.data()), nt * 8);
        is.read(reinterpret_cast<char *>(tr.trace_right.data()), nt * 8);
        if (!is) throw std::runtime_error("Trajectory: truncated data");
        return tr;
    }
};

// ---- source term ------------------------------------------------------------

// f = f1 + f2_x with f1 mean-free per time slice and f2 vanishing at both
// ends.  Samples live on the full node set 0..N so the invariants are
// checkable; the solver consumes f1 + central-difference of f2 at the
// interior nodes.
struct SourceTerm {
    std::vector<std::vector<double>> f1, f2;  // (steps+1) x (N+1)

    SourceTerm() = default;

    static SourceTerm from_functions(const Grid &g,
                                     const std::function<double(double, double)> &f1,
                                     const std::function<double(double, double)> &f2) {
        SourceTerm s;
        const int steps = g.steps();
        s.f1.assign(steps + 1, std::vector<double>(g.N + 1, 0.0));
        s.f2 = s.f1;
        for (int n = 0; n <= steps; ++n) {
            const double t = n * g.dt;
            for (int i = 0; i <= g.N; ++i) {
                if (f1) s.f1[n][i] = f1(t, i * g.h);
                if (f2) s.f2[n][i] = f2(t, i * g.h);
            }
        }
        s.validate(g);
        return s;
    }

    bool empty() const { return f1.empty(); }

    void validate(const Grid &g) const {
        for (const auto &row : f1) {
            double mean = 0.0, scale = 0.0;
            for (int i = 0; i <= g.N; ++i) {
                const double w = (i == 0 || i == g.N) ? 0.5 : 1.0;
                mean += w * row[i];
                scale += w * std::abs(row[i]);
            }
            if (std::abs(mean) > 1e-8 * (1.0 + scale))
                throw std::domain_error("SourceTerm: f1 slice not mean-free");
        }
        for (const auto &row : f2)
            if (std::abs(row.front()) > 1e-12 || std::abs(row.back()) > 1e-12)
                throw std::domain_error("SourceTerm: f2 must vanish at both ends");
    }

    // Effective source at interior node i (1..N-1) and time index n.
    double interior(const Grid &g, int n, int i) const {
        return f1[n][i] + (f2[n][i + 1] - f2[n][i - 1]) / (2.0 * g.h);
    }
};

// ---- Crank–Nicolson machinery ----------------------------------------------

namespace detail {

// Pentadiagonal operator A = −(∂_x + ∂_xxx) on the interior unknowns, stored
// as five diagonals with the two closure rows overridden.
struct PentaOp {
    int n = 0;
    double m2 = 0, m1 = 0, d0 = 0, p1 = 0, p2 = 0;           // interior rows
    double r0_0 = 0, r0_p1 = 0, r0_p2 = 0;                   // row 0
    double rn_m2 = 0, rn_m1 = 0, rn_0 = 0;                   // row n-1

    PentaOp(const Grid &g) {
        n = g.N - 1;
        const double h = g.h, h3 = h * h * h;
        m2 = 1.0 / (2.0 * h3);
        m1 = 1.0 / (2.0 * h) - 1.0 / h3;
        d0 = 0.0;
        p1 = -1.0 / (2.0 * h) + 1.0 / h3;
        p2 = -1.0 / (2.0 * h3);
        r0_0 = -3.0 / h3;
        r0_p1 = -1.0 / (2.0 * h) + 3.0 / h3;
        r0_p2 = -1.0 / h3;
        rn_m2 = 1.0 / (2.0 * h3);
        rn_m1 = 1.0 / (2.0 * h) - 1.0 / h3;
        rn_0 = -1.0 / (2.0 * h3);
    }

    double coeff(int i, int j) const {
        if (i == 0) {
            if (j == 0) return r0_0;
            if (j == 1) return r0_p1;
            if (j == 2) return r0_p2;
            return 0.0;
        }
        if (i == n - 1) {
            if (j == n - 3) return rn_m2;
            if (j == n - 2) return rn_m1;
            if (j == n - 1) return rn_0;
            return 0.0;
        }
        switch (j - i) {
            case -2: return j >= 0 ? m2 : 0.0;
            case -1: return j >= 0 ? m1 : 0.0;
            case 0: return d0;
            case 1: return j < n ? p1 : 0.0;
            case 2: return j < n ? p2 : 0.0;
            default: return 0.0;
        }
    }

    void apply(const std::vector<double> &y, std::vector<double> &out) const {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 2); ++j)
                s += coeff(i, j) * y[j];
            out[i] = s;
        }
    }

    void apply_trans(const std::vector<double> &y, std::vector<double> &out) const {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 2); ++j)
                s += coeff(j, i) * y[j];
            out[i] = s;
        }
    }
};

// LU-factored I − (dt/2) A in LAPACK banded storage.
struct CnFactor {
    int n = 0;
    double dt = 0.0;
    std::vector<double> ab;
    std::vector<lapack_int> ipiv;
    static constexpr int kl = 2, ku = 2, ldab = 2 * kl + ku + 1;

    CnFactor() = default;
    CnFactor(const PentaOp &A, double step) : n(A.n), dt(step) {
        ab.assign(static_cast<std::size_t>(ldab) * n, 0.0);
        ipiv.resize(n);
        for (int j = 0; j < n; ++j)
            for (int i = std::max(0, j - ku); i <= std::min(n - 1, j + kl); ++i) {
                const double m = (i == j ? 1.0 : 0.0) - 0.5 * dt * A.coeff(i, j);
                ab[static_cast<std::size_t>(j) * ldab + (kl + ku + i - j)] = m;
            }
        const auto info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku, ab.data(),
                                         ldab, ipiv.data());
        if (info != 0)
            throw std::runtime_error("kdv_solver: singular Crank-Nicolson matrix");
    }

    void solve(std::vector<double> &rhs) const {
        const auto info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kl, ku, 1,
                                         ab.data(), ldab, ipiv.data(), rhs.data(), n);
        if (info != 0) throw std::runtime_error("kdv_solver: banded solve failed");
    }

    void solve_trans(std::vector<double> &rhs) const {
        const auto info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'T', n, kl, ku, 1,
                                         ab.data(), ldab, ipiv.data(), rhs.data(), n);
        if (info != 0) throw std::runtime_error("kdv_solver: banded solve failed");
    }
};

// −½(y²)_x by the conservative central difference, zero boundary values.
inline void conservative_flux(const std::vector<double> &y, double h,
                              std::vector<double> &out) {
    const int n = static_cast<int>(y.size());
    for (int i = 0; i < n; ++i) {
        const double yr = (i + 1 < n) ? y[i + 1] : 0.0;
        const double yl = (i > 0) ? y[i - 1] : 0.0;
        out[i] = -(yr * yr - yl * yl) / (4.0 * h);
    }
}

} // namespace detail

// ---- linear solver ----------------------------------------------------------

inline Trajectory solve_linear(const Grid &g, const std::vector<double> &y0,
                               const ControlSignal &u,
                               const SourceTerm &f = SourceTerm()) {
    const int n = g.N - 1;
    if (!y0.empty() && static_cast<int>(y0.size()) != n)
        throw std::domain_error("solve_linear: y0 size must be N-1");
    if (!f.empty() && (static_cast<int>(f.f1.size()) != g.steps() + 1 ||
                       static_cast<int>(f.f1[0].size()) != g.N + 1))
        throw std::domain_error("solve_linear: source grid mismatch");

    detail::PentaOp A(g);
    detail::CnFactor lu(A, g.dt);
    const int steps = g.steps();

    Trajectory tr;
    tr.grid = g;
    tr.times.resize(steps + 1);
    tr.states.assign(steps + 1, std::vector<double>(n, 0.0));
    tr.trace_left.resize(steps + 1);
    tr.trace_right.resize(steps + 1);

    std::vector<double> y = y0.empty() ? std::vector<double>(n, 0.0) : y0;
    double ymax = 0.0;
    for (double v : y) ymax = std::max(ymax, std::abs(v));
    if (ymax > 0.0) {
        const double u0 = u.value(0.0);
        const double d = Trajectory::right_trace_of(y, g.h);
        if (std::abs(d - u0) > 0.1 * (1.0 + std::abs(u0))) tr.compat_warning = true;
    }

    std::vector<double> rhs(n), ay(n);
    tr.states[0] = y;
    for (int m = 0; m < steps; ++m) {
        const double t0 = m * g.dt, t1 = t0 + g.dt;
        const double umid = 0.5 * (u.value(t0) + u.value(t1));
        A.apply(y, ay);
        for (int i = 0; i < n; ++i) rhs[i] = y[i] + 0.5 * g.dt * ay[i];
        rhs[n - 1] -= g.dt * umid / (g.h * g.h);
        if (!f.empty())
            for (int i = 0; i < n; ++i)
                rhs[i] += 0.5 * g.dt *
                          (f.interior(g, m, i + 1) + f.interior(g, m + 1, i + 1));
        lu.solve(rhs);
        y = rhs;
        tr.states[m + 1] = y;
    }
    for (int m = 0; m <= steps; ++m) {
        tr.times[m] = m * g.dt;
        tr.trace_left[m] = Trajectory::left_trace_of(tr.states[m], g.h);
        tr.trace_right[m] = Trajectory::right_trace_of(tr.states[m], g.h);
    }
    return tr;
}

// ---- nonlinear solver -------------------------------------------------------

namespace detail {

struct NonlinearStepper {
    const Grid &g;
    PentaOp A;
    std::vector<CnFactor> lus;  // level k factors I − (dt/2^{k+1}) A

    explicit NonlinearStepper(const Grid &grid) : g(grid), A(grid) {}

    const CnFactor &factor(int level) {
        while (static_cast<int>(lus.size()) <= level)
            lus.emplace_back(A, g.dt / static_cast<double>(1 << lus.size()));
        return lus[static_cast<std::size_t>(level)];
    }

    bool picard(std::vector<double> &y, double t, double dt, int level,
                const ControlSignal &u) {
        const int n = A.n;
        const double umid = 0.5 * (u.value(t) + u.value(t + dt));
        std::vector<double> base(n), ay(n), nl(n), cand(n), next(n);
        A.apply(y, ay);
        conservative_flux(y, g.h, nl);
        for (int i = 0; i < n; ++i)
            base[i] = y[i] + 0.5 * dt * (ay[i] + nl[i]);
        base[n - 1] -= dt * umid / (g.h * g.h);
        cand = y;
        double ymax = 1.0;
        for (double v : y) ymax = std::max(ymax, std::abs(v));
        for (int k = 0; k < 8; ++k) {
            conservative_flux(cand, g.h, nl);
            for (int i = 0; i < n; ++i) next[i] = base[i] + 0.5 * dt * nl[i];
            factor(level).solve(next);
            double res = 0.0;
            for (int i = 0; i < n; ++i) res = std::max(res, std::abs(next[i] - cand[i]));
            cand.swap(next);
            if (k >= 1 && res < 1e-10 * ymax) {
                y = cand;
                return true;
            }
        }
        return false;
    }

    void advance(std::vector<double> &y, double t, double dt, int level,
                 const ControlSignal &u) {
        if (picard(y, t, dt, level, u)) return;
        if (level >= 5)
            throw std::runtime_error(
                "solve_nonlinear: Picard stalled after 5 step halvings at t = " +
                std::to_string(t));
        advance(y, t, 0.5 * dt, level + 1, u);
        advance(y, t + 0.5 * dt, 0.5 * dt, level + 1, u);
    }
};

} // namespace detail

inline Trajectory solve_nonlinear(const Grid &g, const std::vector<double> &y0,
                                  const ControlSignal &u) {
    const int n = g.N - 1;
    if (!y0.empty() && static_cast<int>(y0.size()) != n)
        throw std::domain_error("solve_nonlinear: y0 size must be N-1");
    detail::NonlinearStepper st(g);
    const int steps = g.steps();

    Trajectory tr;
    tr.grid = g;
    tr.times.resize(steps + 1);
    tr.states.assign(steps + 1, std::vector<double>(n, 0.0));
    tr.trace_left.resize(steps + 1);
    tr.trace_right.resize(steps + 1);

    std::vector<double> y = y0.empty() ? std::vector<double>(n, 0.0) : y0;
    tr.states[0] = y;
    for (int m = 0; m < steps; ++m) {
        st.advance(y, m * g.dt, g.dt, 0, u);
        tr.states[m + 1] = y;
    }
    for (int m = 0; m <= steps; ++m) {
        tr.times[m] = m * g.dt;
        tr.trace_left[m] = Trajectory::left_trace_of(tr.states[m], g.h);
        tr.trace_right[m] = Trajectory::right_trace_of(tr.states[m], g.h);
    }
    return tr;
}

// ---- periodic KdV–Burgers ---------------------------------------------------

// Mode n of y_t + 4y_x + y_xxx − 3y_xx = f on the 2π-periodic circle evolves
// with the kernel e^{−μ_n (t−τ)}, μ_n = i(4n − n³) + 3n².  The integrator is
// exact in the exponential and trapezoidal in the forcing.
struct KdvbSolution {
    int n_modes = 0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<std::vector<cplx>> modes;  // time x (2 n_modes + 1), index n + n_modes

    cplx mode(int time_index, int n) const {
        return modes[time_index][static_cast<std::size_t>(n + n_modes)];
    }

    cplx eval(int time_index, double x) const {
        cplx s = 0.0;
        for (int n = -n_modes; n <= n_modes; ++n)
            s += mode(time_index, n) * std::exp(cplx(0.0, n * x));
        return s;
    }

    // Real-part sample as a periodic Trajectory on an N-node circle grid.
    Trajectory trajectory(int N = 0) const {
        if (N <= 0) N = std::max(64, 4 * n_modes);
        Trajectory tr;
        tr.grid = Grid(2.0 * kl_pi, N, dt, times.back() > dt ? times.back() : dt);
        tr.periodic = true;
        tr.times = times;
        tr.states.assign(times.size(), std::vector<double>(N, 0.0));
        const double h = 2.0 * kl_pi / N;
        for (std::size_t m = 0; m < times.size(); ++m)
            for (int i = 0; i < N; ++i)
                tr.states[m][i] = eval(static_cast<int>(m), i * h).real();
        tr.trace_left.assign(times.size(), 0.0);
        tr.trace_right.assign(times.size(), 0.0);
        for (std::size_t m = 0; m < times.size(); ++m) {
            tr.trace_left[m] =
                (tr.states[m][1] - tr.states[m][N - 1]) / (2.0 * h);
            tr.trace_right[m] = tr.trace_left[m];
        }
        return tr;
    }
};

inline cplx kdvb_mode_rate(int n) {
    return cplx(3.0 * n * n, 4.0 * n - static_cast<double>(n) * n * n);
}

inline KdvbSolution kdvb_periodic_solve(int n_modes,
                                        const std::function<cplx(int, double)> &f,
                                        double T, double dt) {
    if (n_modes < 1 || !(T > 0.0) || !(dt > 0.0) || dt > T)
        throw std::domain_error("kdvb_periodic_solve: bad sizes");
    const int steps = static_cast<int>(std::llround(T / dt));
    KdvbSolution sol;
    sol.n_modes = n_modes;
    sol.dt = dt;
    sol.times.resize(steps + 1);
    sol.modes.assign(steps + 1, std::vector<cplx>(2 * n_modes + 1, 0.0));
    for (int m = 0; m <= steps; ++m) {
        sol.times[m] = m * dt;
        if (std::abs(f(0, m * dt)) > 1e-14)
            throw std::domain_error("kdvb_periodic_solve: mode-0 forcing must vanish");
    }
    for (int n = -n_modes; n <= n_modes; ++n) {
        if (n == 0) continue;
        const cplx mu = kdvb_mode_rate(n);
        const cplx decay = std::exp(-mu * dt);
        cplx y = 0.0;
        for (int m = 0; m < steps; ++m) {
            y = decay * (y + 0.5 * dt * f(n, m * dt)) + 0.5 * dt * f(n, (m + 1) * dt);
            sol.modes[m + 1][static_cast<std::size_t>(n + n_modes)] = y;
        }
    }
    return sol;
}

// Post-support smoothing constant: |y_t| + |y_x| ≤ C(δ) · max_n ‖f̂(n,·)‖_{L¹}
// once the forcing has been off for time δ.
inline double kdvb_smoothing_constant(int n_modes, double delta) {
    if (n_modes < 1 || !(delta > 0.0))
        throw std::domain_error("kdvb_smoothing_constant: bad arguments");
    double c = 0.0;
    for (int n = -n_modes; n <= n_modes; ++n) {
        if (n == 0) continue;
        c += (std::abs(kdvb_mode_rate(n)) + std::abs(n)) *
             std::exp(-3.0 * n * n * delta);
    }
    return c;
}

// ---- frequency response -----------------------------------------------------

namespace detail {

inline void resonance_guard(double z, double L) {
    auto zeros = find_real_zeros_H(L, z - 0.05, z + 0.05);
    for (const auto &hz : zeros)
        if (std::abs(hz.z - z) < 1e-3)
            throw std::domain_error(
                "frequency_response: z within 1e-3 of a resonance at z = " +
                std::to_string(hz.z) + "; move off the spectrum");
}

} // namespace detail

// Unit-control transfer value ŷ(z, x) for û = 1.
inline cplx frequency_response(double z, double L, double x) {
    if (!(L > 0.0) || x < 0.0 || x > L)
        throw std::domain_error("frequency_response: need L > 0, x in [0, L]");
    detail::resonance_guard(z, L);
    detail::TransferFactor tf(solve_cubic(cplx(z, 0.0)).lambda, L);
    return tf.eval(x);
}

inline cplx frequency_response(double z, const CriticalPair &pr, double x) {
    return frequency_response(z, pr.L, x);
}

// ∂_x ŷ(z, 0) = û P / det Q with û = 1.
inline cplx frequency_response_deriv0(double z, double L) {
    detail::resonance_guard(z, L);
    auto s = spectral_sample(cplx(z, 0.0), L);
    return s.P / s.detQ;
}

struct EmpiricalResponse {
    cplx value;        // demodulated ŷ(z, x)
    cplx deriv0;       // demodulated ∂_x ŷ(z, 0) from the left trace
};

// Drive u(t) = sin(zt) through the linear solver; demodulate the last 40
// periods after a 20-period transient.
inline EmpiricalResponse empirical_frequency_response(const Grid &g, double z,
                                                      double x) {
    if (!(z > 0.0)) throw std::domain_error("empirical_frequency_response: z > 0");
    detail::resonance_guard(z, g.L);
    const double period = 2.0 * kl_pi / z;
    const int steps_total =
        static_cast<int>(std::ceil(60.0 * period / g.dt));
    Grid run(g.L, g.N, g.dt, steps_total * g.dt);
    ControlSignal u([z](double t) { return std::sin(z * t); }, run.T,
                    steps_total + 1);
    Trajectory tr = solve_linear(run, {}, u);

    // Nearest interior straddle of x with linear interpolation.
    const double s = x / g.h;
    const int i0 = std::max(1, std::min(g.N - 2, static_cast<int>(s)));
    const double w = s - i0;
    auto station = [&](int m) {
        const double a = tr.states[m][i0 - 1];
        const double b = (i0 + 1 <= g.N - 1) ? tr.states[m][i0] : 0.0;
        return (1.0 - w) * a + w * b;
    };

    const int m_hi = steps_total;
    const int m_lo = m_hi - static_cast<int>(std::llround(40.0 * period / g.dt));
    const double t_window = (m_hi - m_lo) * g.dt;
    cplx acc = 0.0, acc_d = 0.0;
    for (int m = m_lo; m <= m_hi; ++m) {
        const double wq = (m == m_lo || m == m_hi) ? 0.5 : 1.0;
        const cplx e = std::exp(cplx(0.0, -z * tr.times[m]));
        acc += wq * station(m) * e;
        acc_d += wq * tr.trace_left[m] * e;
    }
    EmpiricalResponse r;
    r.value = cplx(0.0, 1.0) * (2.0 / t_window) * acc * g.dt;
    r.deriv0 = cplx(0.0, 1.0) * (2.0 / t_window) * acc_d * g.dt;
    return r;
}

} // namespace kdvlab
