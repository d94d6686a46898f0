// Tests for the critical-pair data: lengths, ladder roots, the obstruction
// constant E, the resonant field, the uncontrollable basis and the kernel
// integral asymptotics.

#include <catch2/catch_amalgamated.hpp>

#include <kdvlab/critical_lengths.hpp>

#include <random>
#include <sstream>

using namespace kdvlab;

namespace {
const double pi = 3.14159265358979323846;
} // namespace

TEST_CASE("pair (2,1): length, frequency and frozen E") {
    auto pr = make_pair(2, 1);
    REQUIRE(pr.L == Catch::Approx(2.0 * pi * std::sqrt(7.0 / 3.0)).epsilon(1e-14));
    REQUIRE(pr.p == Catch::Approx(20.0 / (3.0 * std::sqrt(3.0) * std::pow(7.0, 1.5)))
                        .epsilon(1e-14));
    REQUIRE(pr.obstruction_applies);
    REQUIRE(pr.dimM == 1);
    // E = -(3/7)^{3/2} (sqrt 3 + 3i); oracle: brute-force kernel quadrature.
    const cplx expect = -std::pow(3.0 / 7.0, 1.5) * cplx(std::sqrt(3.0), 3.0);
    REQUIRE(std::abs(pr.E - expect) < 1e-12);
    REQUIRE(pr.E1 == pr.E.real());
    REQUIRE(pr.E2 == pr.E.imag());
}

TEST_CASE("ladder roots solve the shifted cubic with equal exponentials") {
    for (int k = 1; k <= 20; ++k) {
        for (int l = 1; l <= k; ++l) {
            auto pr = make_pair(k, l);
            for (int j = 0; j < 3; ++j) {
                const cplx e = pr.eta[j];
                REQUIRE(std::abs(e * e * e + e - cplx(0.0, pr.p)) < 1e-12);
            }
            // All three exponentials coincide at the critical length.
            const cplx w = std::exp(pr.eta[0] * pr.L);
            REQUIRE(std::abs(std::exp(pr.eta[1] * pr.L) - w) < 1e-10);
            REQUIRE(std::abs(std::exp(pr.eta[2] * pr.L) - w) < 1e-10);
        }
    }
}

TEST_CASE("lattice sums over the ladder match their closed forms") {
    for (int k = 2; k <= 12; ++k) {
        for (int l = 1; l < k; ++l) {
            auto pr = make_pair(k, l);
            bool zero_eta = false;
            for (auto &e : pr.eta) zero_eta = zero_eta || std::abs(e) < 1e-14;
            if (zero_eta) continue;
            cplx s2 = 0.0, sq = 0.0;
            for (int j = 0; j < 3; ++j) {
                const cplx d = pr.eta[(j + 1) % 3] - pr.eta[j];
                s2 += pr.eta[(j + 2) % 3] * pr.eta[(j + 2) % 3] * d;
                sq += d / pr.eta[(j + 2) % 3];
            }
            const double c = static_cast<double>(k) * l * (k + l);
            const cplx s2_ref = cplx(0.0, -8.0 * std::pow(pi, 3) * c / std::pow(pr.L, 3));
            const cplx sq_ref = -27.0 * c /
                                (static_cast<double>(k + 2 * l) * (2 * k + l) * (k - l));
            REQUIRE(std::abs(s2 - s2_ref) < 1e-13 * (1.0 + std::abs(s2_ref)));
            REQUIRE(std::abs(sq - sq_ref) < 1e-13 * (1.0 + std::abs(sq_ref)));
        }
    }
}

TEST_CASE("E: direct sums agree with the closed form") {
    for (int k = 2; k <= 20; ++k) {
        for (int l = 1; l < k; ++l) {
            auto pr = make_pair(k, l);
            bool zero_eta = false;
            for (auto &e : pr.eta) zero_eta = zero_eta || std::abs(e) < 1e-14;
            if (zero_eta) continue;
            const cplx a = compute_E(pr, EMethod::direct);
            const cplx b = compute_E(pr, EMethod::closed_form);
            REQUIRE(std::abs(a - b) < 1e-12 * (1.0 + std::abs(b)));
        }
    }
}

TEST_CASE("E vanishes exactly on the divisible family") {
    for (int k = 1; k <= 12; ++k) {
        for (int l = 1; l <= k; ++l) {
            auto pr = make_pair(k, l);
            REQUIRE(pr.obstruction_applies == (((2 * k + l) % 3) != 0));
            if (pr.obstruction_applies) {
                REQUIRE(std::abs(pr.E) > 1e-6);
            } else {
                REQUIRE(std::abs(pr.E) < 1e-13);
            }
        }
    }
}

TEST_CASE("E antisymmetry: negated ladder gives the conjugate") {
    for (auto [k, l] : {std::pair<int, int>{2, 1}, {3, 2}, {5, 1}}) {
        auto pr = make_pair(k, l);
        auto rf = reflect(pr);
        REQUIRE(std::abs(rf.E - std::conj(pr.E)) < 1e-14);
        REQUIRE(std::abs(compute_E(rf, EMethod::direct) - std::conj(pr.E)) < 1e-12);
        REQUIRE(rf.p == -pr.p);
        for (int j = 0; j < 3; ++j) REQUIRE(rf.eta[j] == -pr.eta[j]);
    }
}

TEST_CASE("equal indices: zero frequency, zero E, direct mode refuses") {
    auto pr = make_pair(1, 1);
    REQUIRE(pr.L == Catch::Approx(2.0 * pi).epsilon(1e-14));
    REQUIRE(pr.p == 0.0);
    REQUIRE(std::abs(pr.E) < 1e-14);
    REQUIRE_FALSE(pr.obstruction_applies);
    REQUIRE_THROWS_AS(compute_E(pr, EMethod::direct), std::domain_error);
}

TEST_CASE("pair enumeration: ordering, multiplicities and bounds") {
    auto ps = enumerate_pairs(100);
    REQUIRE(!ps.empty());
    REQUIRE(ps.front().k == 1);
    REQUIRE(ps.front().l == 1);
    int prev = 0;
    for (const auto &pr : ps) {
        const int s = pr.k * pr.k + pr.k * pr.l + pr.l * pr.l;
        REQUIRE(s >= prev);
        REQUIRE(s <= 100);
        REQUIRE(pr.k >= pr.l);
        REQUIRE(pr.l >= 1);
        prev = s;
    }
    // s = 91 is represented twice: (6,5) and (9,1).
    REQUIRE(make_pair(6, 5).dimM == 2);
    REQUIRE(make_pair(9, 1).dimM == 2);
    REQUIRE(make_pair(5, 3).dimM == 1);
    int n91 = 0;
    for (const auto &pr : ps)
        if (pr.k * pr.k + pr.k * pr.l + pr.l * pr.l == 91) ++n91;
    REQUIRE(n91 == 2);
}

TEST_CASE("resonant mode: clamped boundary values at both ends") {
    for (auto [k, l] : {std::pair<int, int>{2, 1}, {3, 1}, {3, 2}, {1, 1}}) {
        auto pr = make_pair(k, l);
        PsiField psi(pr);
        const double scale = std::abs(psi.phi(0.5 * pr.L)) + 1.0;
        for (double x : {0.0, pr.L}) {
            REQUIRE(std::abs(psi.phi(x)) < 1e-12 * scale);
            REQUIRE(std::abs(psi.phi_x(x)) < 1e-12 * scale);
        }
    }
}

TEST_CASE("resonant field solves the linear equation pointwise") {
    auto pr = make_pair(2, 1);
    PsiField psi(pr);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ux(0.0, pr.L), ut(0.0, 40.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double t = ut(rng), x = ux(rng);
        REQUIRE(std::abs(psi.pde_residual(t, x)) < 1e-10);
        // Psi = E1 xi1 + E2 xi2.
        REQUIRE(psi.Psi(t, x) ==
                Catch::Approx(pr.E1 * psi.xi1(t, x) + pr.E2 * psi.xi2(t, x))
                    .margin(1e-12));
    }
    // Psi_t against a centred difference.
    const double t0 = 1.3, x0 = 2.7, dt = 1e-6;
    const double fd = (psi.Psi(t0 + dt, x0) - psi.Psi(t0 - dt, x0)) / (2.0 * dt);
    REQUIRE(psi.Psi_t(t0, x0) == Catch::Approx(fd).margin(1e-7));
}

TEST_CASE("grid sampling agrees with the exact evaluators") {
    auto pr = make_pair(3, 2);
    PsiField psi(pr);
    const int N = 64;
    auto v = psi.sample_Psi(0.7, N);
    auto vx = psi.sample_Psi_x(0.7, N);
    REQUIRE(v.size() == N - 1);
    const double h = pr.L / N;
    REQUIRE(v[9] == psi.Psi(0.7, 10 * h));
    REQUIRE(vx[31] == psi.Psi_x(0.7, 32 * h));
}

TEST_CASE("uncontrollable basis: two directions for (2,1)") {
    auto mb = m_basis(make_pair(2, 1), 256);
    REQUIRE(mb.dim == 2);
    REQUIRE_FALSE(mb.reduced);
    const double h = 2.0 * pi * std::sqrt(7.0 / 3.0) / 256;
    for (int a = 0; a < 2; ++a) {
        double na = 0.0;
        for (double v : mb.vecs[a]) na += v * v;
        REQUIRE(na * h == Catch::Approx(1.0).epsilon(1e-10));
    }
    double cross = 0.0;
    for (std::size_t i = 0; i < mb.vecs[0].size(); ++i)
        cross += mb.vecs[0][i] * mb.vecs[1][i];
    REQUIRE(std::abs(cross * h) < 1e-10);
}

TEST_CASE("uncontrollable basis collapses to 1 - cos x at length 2 pi") {
    const int N = 256;
    auto mb = m_basis(make_pair(1, 1), N);
    REQUIRE(mb.dim == 1);
    REQUIRE(mb.reduced);
    // Normalise 1 - cos x on the same grid and compare up to sign.
    const double h = 2.0 * pi / N;
    std::vector<double> ref(N - 1);
    double nr = 0.0;
    for (int i = 1; i < N; ++i) {
        ref[i - 1] = 1.0 - std::cos(i * h);
        nr += ref[i - 1] * ref[i - 1];
    }
    nr = std::sqrt(nr * h);
    double dot = 0.0;
    for (int i = 0; i < N - 1; ++i) dot += mb.vecs[0][i] * ref[i] / nr;
    REQUIRE(std::abs(std::abs(dot * h) - 1.0) < 1e-10);
}

TEST_CASE("kernel integral: frozen moderate-frequency value") {
    // Oracle: long-double trapezoid with 4e6 nodes.
    auto pr = make_pair(2, 1);
    const cplx v = integral_B(1.5, pr);
    REQUIRE(v.real() == Catch::Approx(-0.36623941).margin(1e-6));
    REQUIRE(v.imag() == Catch::Approx(-0.39880208).margin(1e-6));
}

TEST_CASE("kernel integral obeys the reflection symmetry") {
    auto pr = make_pair(2, 1);
    auto rf = reflect(pr);
    for (double z : {1.5, 30.0, 1000.0}) {
        const cplx a = integral_B(z, pr);
        const cplx b = integral_B(-z, rf);
        REQUIRE(std::abs(b - std::conj(a)) < 1e-9 * (1.0 + std::abs(a)));
    }
}

TEST_CASE("kernel integral converges to E at the -4/3 rate") {
    auto pr = make_pair(2, 1);
    const cplx E = pr.E;
    const double g3 = std::abs(std::pow(1e3, 4.0 / 3.0) * integral_B(1e3, pr) - E);
    const double g4 = std::abs(std::pow(1e4, 4.0 / 3.0) * integral_B(1e4, pr) - E);
    const double g5 = std::abs(std::pow(1e5, 4.0 / 3.0) * integral_B(1e5, pr) - E);
    REQUIRE(g4 < 0.10 * std::abs(E));
    // Gap shrinks by at least the -1/3 slope per decade (slope here is ~ -0.7).
    REQUIRE(g4 < 0.6 * g3);
    REQUIRE(g5 < 0.6 * g4);
}

TEST_CASE("csv export round-trips the pair table") {
    auto ps = enumerate_pairs(20);
    std::ostringstream os;
    write_pairs_csv(os, ps);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    REQUIRE(line == "k,l,L,p,Re E,Im E,dimM,obstruction_applies");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        int k, l, dimM, obst;
        double L, p, e1, e2;
        REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%lf,%d,%d", &k, &l,
                            &L, &p, &e1, &e2, &dimM, &obst) == 8);
        auto pr = make_pair(k, l);
        REQUIRE(L == pr.L);
        REQUIRE(p == pr.p);
        REQUIRE(e1 == pr.E1);
        ++rows;
    }
    REQUIRE(rows == ps.size());
}

TEST_CASE("invalid arguments throw") {
    REQUIRE_THROWS_AS(make_pair(1, 2), std::domain_error);
    REQUIRE_THROWS_AS(make_pair(0, 0), std::domain_error);
    REQUIRE_THROWS_AS(enumerate_pairs(2), std::domain_error);
    REQUIRE_THROWS_AS(m_basis(make_pair(2, 1), 4), std::domain_error);
    REQUIRE_THROWS_AS(integral_B(std::nan(""), make_pair(2, 1)), std::domain_error);
}
