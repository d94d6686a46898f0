/*
 * Acceptance gate: one self-contained check per headline property, each
 * printed as a single PASS/FAIL line with its headline numbers and runtime.
 * Exit status is the number of failing criteria.
 */

#include <kdvlab/obstruction.hpp>
#include <kdvlab/toy_ode.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace kdvlab;

namespace {

int failures = 0;

void run(int idx, const char *name, const std::function<bool(std::string &)> &fn) {
    std::string detail;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception &e) {
        detail = std::string("exception: ") + e.what();
    }
    const double el =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("criterion %02d %-28s %s  (%.1f s)  %s\n", idx, name,
                ok ? "PASS" : "FAIL", el, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double lsq_slope(const std::vector<double> &x, const std::vector<double> &y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

double l2h(const std::vector<double> &v, double h) {
    return std::sqrt(detail::dot_h(v, v, h));
}

// Relative error of the linear solver against the exact resonant evolution.
double psi_rel_error(int N, double dt) {
    auto pr = make_pair(2, 1);
    PsiField psi(pr);
    Grid g(pr.L, N, dt, 1.0);
    auto tr = solve_linear(g, psi.sample_Psi(0.0, N), ControlSignal::zero(1.0, 2));
    auto ye = psi.sample_Psi(1.0, N);
    std::vector<double> d(ye.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = tr.states.back()[i] - ye[i];
    return l2h(d, g.h) / l2h(ye, g.h);
}

} // namespace

int main() {
    // 1. Cubic roots: residuals, Vieta, asymptotic convergence rate.
    run(1, "cubic-vieta-asymptotics", [](std::string &out) {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> U(-1e3, 1e3);
        double worst = 0.0;
        for (int s = 0; s < 100000; ++s) {
            const cplx z(U(rng), U(rng));
            auto r = solve_cubic(z);
            const double tol = 1e-12 * (1.0 + std::abs(z));
            cplx e1 = 0.0, e2 = 0.0, e3 = 1.0;
            for (auto lam : r.lambda) {
                const cplx res = lam * lam * lam + lam + cplx(0., 1.) * z;
                worst = std::max(worst, std::abs(res) / tol);
                e1 += lam;
                e3 *= lam;
            }
            e2 = r.lambda[0] * r.lambda[1] + r.lambda[0] * r.lambda[2] +
                 r.lambda[1] * r.lambda[2];
            worst = std::max(worst, std::abs(e1) / tol);
            worst = std::max(worst, std::abs(e2 - 1.0) / tol);
            worst = std::max(worst, std::abs(e3 + cplx(0., 1.) * z) / tol);
            if (worst > 1.0) break;
        }
        std::vector<double> lx, ly;
        for (double ez = 2.0; ez <= 7.0; ez += 1.0) {
            const double zz = std::pow(10.0, ez);
            auto r = solve_cubic(cplx(zz, 0.0));
            double gap = 0.0;
            for (int j = 1; j <= 3; ++j) {
                const cplx approx = lambda_asymptotic(cplx(zz, 0.0), j);
                double best = 1e300;
                for (const auto &lam : r.lambda)
                    best = std::min(best, std::abs(lam - approx));
                gap = std::max(gap, best / std::pow(zz, 1.0 / 3.0));
            }
            lx.push_back(std::log10(zz));
            ly.push_back(std::log10(gap));
        }
        const double slope = lsq_slope(lx, ly);
        char b[128];
        std::snprintf(b, sizeof(b), "worst_res/tol=%.2f slope=%.2f", worst, slope);
        out = b;
        return worst <= 1.0 && slope <= -0.6;
    });

    // 2. Eigenfrequencies of the ten distinct pairs with k, l <= 5.
    run(2, "eigenfrequency-ladder", [](std::string &out) {
        double worstH = 0.0, worst_eta = 0.0, min_simple = 1e30;
        int n_pairs = 0;
        for (int k = 2; k <= 5; ++k)
            for (int l = 1; l < k; ++l) {
                auto pr = make_pair(k, l);
                ++n_pairs;
                for (double s : {1.0, -1.0})
                    worstH = std::max(
                        worstH,
                        std::abs(spectral_sample(cplx(s * pr.p, 0.0), pr.L).H));
                auto r = solve_cubic(cplx(-pr.p, 0.0));
                for (int j = 0; j < 3; ++j) {
                    double best = 1e30;
                    for (int m = 0; m < 3; ++m)
                        best = std::min(best, std::abs(r.lambda[j] - pr.eta[m]));
                    worst_eta = std::max(worst_eta, best);
                }
                for (double s : {1.0, -1.0})
                    min_simple = std::min(
                        min_simple,
                        std::abs(detail::H_deriv(cplx(s * pr.p, 0.0), pr.L)));
            }
        char b[160];
        std::snprintf(b, sizeof(b),
                      "pairs=%d max|H(+-p)|=%.1e eta_gap=%.1e min|H'|=%.1e",
                      n_pairs, worstH, worst_eta, min_simple);
        out = b;
        return n_pairs == 10 && worstH <= 1e-9 && worst_eta <= 1e-10 &&
               min_simple > 1e-6;
    });

    // 3. Obstruction constant: direct ladder sums vs closed form; exact zeros.
    run(3, "obstruction-constant", [](std::string &out) {
        double worst = 0.0, worst_zero = 0.0;
        for (int k = 1; k <= 20; ++k)
            for (int l = 1; l <= k; ++l) {
                auto pr = make_pair(k, l);
                if ((2 * k + l) % 3 != 0) {
                    const cplx a = compute_E(pr, EMethod::direct);
                    const cplx b = compute_E(pr, EMethod::closed_form);
                    worst = std::max(worst,
                                     std::abs(a - b) / (1.0 + std::abs(b)));
                } else {
                    worst_zero = std::max(worst_zero, std::abs(pr.E));
                }
            }
        char b[128];
        std::snprintf(b, sizeof(b), "direct_vs_closed=%.1e divisible_max=%.1e",
                      worst, worst_zero);
        out = b;
        return worst <= 1e-12 && worst_zero <= 1e-13;
    });

    // 4. Kernel integral converges to E at the -4/3 rate.
    run(4, "kernel-asymptotics", [](std::string &out) {
        auto pr = make_pair(2, 1);
        const cplx E = pr.E;
        std::vector<double> lx, ly;
        double g4 = 0.0;
        for (double ez = 3.0; ez <= 7.0; ez += 1.0) {
            const double zz = std::pow(10.0, ez);
            const double gap =
                std::abs(std::pow(zz, 4.0 / 3.0) * integral_B(zz, pr) - E) /
                std::abs(E);
            if (ez == 4.0) g4 = gap;
            lx.push_back(ez);
            ly.push_back(std::log10(gap));
        }
        const double slope = lsq_slope(lx, ly);
        char b[128];
        std::snprintf(b, sizeof(b), "gap@1e4=%.3f slope=%.2f", g4, slope);
        out = b;
        return g4 <= 0.10 && slope <= -0.25;
    });

    // 5. Solver vs the exact resonant solution + bracket identity.
    run(5, "solver-validation", [](std::string &out) {
        const double e1 = psi_rel_error(512, 1e-3);
        const double e2 = psi_rel_error(1024, 5e-4);
        auto pr = make_pair(2, 1);
        PsiField psi(pr);
        Grid g(pr.L, 256, 1e-3, 1.0);
        auto y0 = psi.sample_Psi(0.0, 256);
        for (auto &v : y0) v *= 0.3;
        ControlSignal u([](double t) { return 0.2 * std::sin(3.0 * t); }, 1.0,
                        static_cast<int>(g.steps()) + 1);
        auto tr = solve_nonlinear(g, y0, u);
        double worst = 0.0;
        for (long long m = 1; m < g.steps(); ++m) {
            auto p0 = psi.sample_Psi(tr.times[static_cast<std::size_t>(m - 1)], 256);
            auto p2 = psi.sample_Psi(tr.times[static_cast<std::size_t>(m + 1)], 256);
            auto px = psi.sample_Psi_x(tr.times[static_cast<std::size_t>(m)], 256);
            double ia = 0.0, ib = 0.0, r = 0.0;
            for (int i = 0; i < 255; ++i) {
                ia += tr.states[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)] * p0[static_cast<std::size_t>(i)];
                ib += tr.states[static_cast<std::size_t>(m + 1)][static_cast<std::size_t>(i)] * p2[static_cast<std::size_t>(i)];
                r += tr.states[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)] *
                     tr.states[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)] * px[static_cast<std::size_t>(i)];
            }
            worst = std::max(worst, std::abs((ib - ia) * g.h / (2.0 * g.dt) -
                                             0.5 * r * g.h));
        }
        const double C = worst / (g.h + g.dt);
        char b[160];
        std::snprintf(b, sizeof(b),
                      "err512=%.2e refine=%.2f bracket_C=%.3f", e1, e1 / e2, C);
        out = b;
        return e1 <= 5e-3 && e1 / e2 >= 1.8 && C < 1.0;
    });

    // 6. Parseval bridge for ten null controls.
    run(6, "parseval-bridge", [](std::string &out) {
        auto pr = make_pair(2, 1);
        auto rep = sign_definiteness_sweep(pr, {1.0}, 10, 7);
        double worst = 0.0;
        int kept = 0;
        for (const auto &r : rep.records)
            if (r.kept) {
                ++kept;
                worst = std::max(worst, r.parseval_gap);
            }
        char b[96];
        std::snprintf(b, sizeof(b), "kept=%d max_gap=%.4f", kept, worst);
        out = b;
        return kept == 10 && worst < 0.02;
    });

    // 7. Sign-definiteness of the obstruction form at three horizons.
    run(7, "sign-definiteness", [](std::string &out) {
        auto pr = make_pair(2, 1);
        auto rep = sign_definiteness_sweep(pr, {0.25, 0.5, 1.0}, 50, 7,
                                           coarse_sweep_options);
        bool ok = true;
        std::string acc;
        for (const auto &v : rep.verdicts) {
            char b[96];
            std::snprintf(b, sizeof(b), "T=%.2f kept=%d minco=%.3f ", v.T,
                          v.kept, v.min_coercivity);
            acc += b;
            ok = ok && v.all_positive && v.min_I_psi > 0.0 &&
                 v.min_coercivity > 0.0 && v.kept >= 45;
        }
        out = acc;
        return ok;
    });

    // 8. Normalized ratio approaches E as the horizon shrinks.
    run(8, "ratio-monotone", [](std::string &out) {
        auto pr = make_pair(2, 1);
        auto rep = sign_definiteness_sweep(pr, {0.5, 0.25, 0.1}, 20, 7);
        double med[3] = {0., 0., 0.};
        // Verdicts are in ascending T order: 0.1, 0.25, 0.5.
        for (const auto &v : rep.verdicts) {
            if (v.T == 0.5) med[0] = v.median_gap;
            if (v.T == 0.25) med[1] = v.median_gap;
            if (v.T == 0.1) med[2] = v.median_gap;
        }
        char b[128];
        std::snprintf(b, sizeof(b), "medians=%.4f/%.4f/%.4f", med[0], med[1],
                      med[2]);
        out = b;
        return med[0] > med[1] && med[1] > med[2] && med[1] <= 0.5;
    });

    // 9. HUM at the L = 2pi critical length.
    run(9, "hum-controllability", [](std::string &out) {
        auto pr = make_pair(1, 1);
        Grid g(2.0 * kl_pi, 256, 2e-3, 2.0);
        const int n = g.N - 1;
        double worst = 0.0;
        for (int k = 1; k <= 5; ++k) {
            std::vector<double> target(static_cast<std::size_t>(n));
            for (int i = 1; i < g.N; ++i)
                target[static_cast<std::size_t>(i) - 1] = std::sin(k * i * g.h);
            auto h = hum_control(g, target, -1.0, &pr, 400, 1e-10);
            worst = std::max(worst, h.residual);
        }
        // Gramian symmetry through random vectors.
        std::mt19937_64 rng(3);
        std::normal_distribution<double> G(0.0, 1.0);
        std::vector<double> a(static_cast<std::size_t>(n)), bb(a);
        for (auto &v : a) v = G(rng);
        for (auto &v : bb) v = G(rng);
        auto la = detail::gramian_apply(g, a);
        auto lb = detail::gramian_apply(g, bb);
        const double s1 = detail::dot_h(la, bb, g.h);
        const double s2 = detail::dot_h(lb, a, g.h);
        const double sym = std::abs(s1 - s2) / std::max(std::abs(s1), 1e-300);
        // Stall on the uncontrollable direction 1 - cos x.
        std::vector<double> mvec(static_cast<std::size_t>(n));
        for (int i = 1; i < g.N; ++i)
            mvec[static_cast<std::size_t>(i) - 1] = 1.0 - std::cos(i * g.h);
        auto hs = hum_control(g, mvec, -1.0, nullptr, 100, 1e-12);
        char b[128];
        std::snprintf(b, sizeof(b), "res=%.2e sym=%.1e stall_res=%.2f", worst,
                      sym, hs.residual);
        out = b;
        return worst <= 1e-3 && sym <= 1e-8 && hs.residual > 0.5;
    });

    // 10. The three-dimensional model system.
    run(10, "toy-model", [](std::string &out) {
        const double c = 0.7, Tq = kl_pi / 2.0;
        ControlSignal uc([=](double) { return c; }, Tq, 2001);
        const double closed =
            std::abs(toy_simulate(uc, Tq, 1e-3 * Tq).y2 - c * c * (kl_pi - 2.0));
        auto r1 = toy_obstruction_check(kl_pi / 2.0, 200, 3);
        auto r2 = toy_obstruction_check(kl_pi, 200, 3);
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> UT(0.5, 2.0 * kl_pi);
        double worst = 0.0;
        for (int s = 0; s < 25; ++s) {
            const double T = UT(rng);
            auto u = detail::toy_random_control(rng, T, 32001);
            auto st = toy_simulate(u, T, 1e-3 * T);
            auto [y2, y3] = toy_exact(u, T);
            const double scale = std::max({1.0, std::abs(y2), std::abs(y3)});
            worst = std::max({worst, std::abs(st.y2 - y2) / scale,
                              std::abs(st.y3 - y3) / scale});
        }
        char b[160];
        std::snprintf(b, sizeof(b),
                      "closed_form=%.1e violations=%d/%d rk4_vs_exact=%.1e",
                      closed, r1.y2_violations + r1.y3_violations,
                      r2.y3_violations, worst);
        out = b;
        return closed <= 1e-8 && r1.y2_violations == 0 &&
               r1.y3_violations == 0 && r2.y3_violations == 0 && worst <= 1e-7;
    });

    // 11. Picard steering into the uncontrollable plane.
    run(11, "nonlinear-steering", [](std::string &out) {
        auto pr = make_pair(2, 1);
        const double T = 1.2 * kl_pi / pr.p;
        const double rho = 1e-3;
        SteerOptions o;
        o.picard = 3;
        auto mb = m_basis(pr, o.N);
        std::vector<double> yT(mb.vecs[0].size());
        for (std::size_t i = 0; i < yT.size(); ++i) yT[i] = rho * mb.vecs[0][i];
        auto r = nonlinear_steer(pr, {}, yT, T, rho, o);
        char b[160];
        std::string rs;
        for (double v : r.residuals) {
            std::snprintf(b, sizeof(b), "%.4f ", v);
            rs += b;
        }
        std::snprintf(b, sizeof(b), "residuals=%srot_err=%.1fdeg", rs.c_str(),
                      r.rotation_error * 180.0 / kl_pi);
        out = b;
        return !r.residuals.empty() && !r.diverged &&
               r.residuals.back() * 2.0 <= r.residuals.front();
    });

    // 12. Analytic-structure checks: monodromy, lattice sums, line floors.
    run(12, "analytic-structure", [](std::string &out) {
        double defect = 0.0;
        for (double sgn : {1.0, -1.0}) {
            auto rep = monodromy_defect(cplx(sgn * branch_point, 0.0), 1e-2,
                                        2.0 * kl_pi * std::sqrt(7.0 / 3.0));
            defect = std::max({defect, rep.defect_G, rep.defect_H});
        }
        double csup = 0.0;
        for (int j = 0; j <= 1; ++j)
            for (double ez = 1.0; ez <= 6.0; ez += 1.0) {
                const double z = std::pow(10.0, ez);
                auto s = pre1_sum(z, j, 500000);
                csup = std::max(csup, (s.value + s.tail) *
                                          std::pow(z + 2.0, (2.0 - j) / 3.0) /
                                          std::log(z + 2.0));
            }
        double min_floor = 1e300;
        for (int m = 5; m <= 12; ++m) {
            auto rep = detq_line_bound(2.0 * kl_pi * std::sqrt(7.0 / 3.0), m);
            min_floor = std::min(min_floor, rep.floor_scaled);
        }
        char b[128];
        std::snprintf(b, sizeof(b), "monodromy=%.1e lattice_C=%.2f floor=%.1e",
                      defect, csup, min_floor);
        out = b;
        return defect <= 1e-6 && std::isfinite(csup) && csup < 10.0 &&
               min_floor > 0.0;
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures;
}
