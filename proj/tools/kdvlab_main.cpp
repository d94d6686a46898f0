/*
 * kdvlab — command-line front end for the KdV boundary-control laboratory.
 *
 * Subcommands cover the root solver, the spectral transfer function, the
 * critical-length catalogue, linear/nonlinear simulation, the frequency
 * response, HUM and null controls, the obstruction experiments, the
 * fixed-point steering map, and the toy ODE model.  Every run writes its
 * data files plus a manifest (config hash, version, wall time) into --out.
 * Config files are TOML (via --config); unknown keys are rejected.  The
 * KDVLAB_SEED environment variable overrides any configured seed.
 *
 * Exit codes: 0 success, 2 an asserted property failed, 1 usage or runtime
 * error.
 */

#include <kdvlab/obstruction.hpp>
#include <kdvlab/toy_ode.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace kdvlab;
using nlohmann::json;

namespace {

struct Common {
    std::string out = "kdvlab-out";
    std::string format = "csv";
    std::uint64_t seed = 7;
    int jobs = 1;
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--format", c.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", c.seed, "RNG seed (KDVLAB_SEED overrides)");
    cmd->add_option("--jobs", c.jobs, "worker pool size for sweeps")
        ->check(CLI::Range(1, 64));
}

void apply_env_seed(Common &c) {
    if (const char *e = std::getenv("KDVLAB_SEED")) c.seed = std::strtoull(e, nullptr, 10);
}

std::uint64_t fnv_hash(const std::string &s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

struct RunContext {
    fs::path dir;
    std::string command;
    std::string config_repr;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;

    explicit RunContext(const Common &c, std::string cmd, std::string cfg)
        : dir(c.out), command(std::move(cmd)), config_repr(std::move(cfg)) {
        fs::create_directories(dir);
    }

    std::ofstream open(const std::string &name) {
        outputs.push_back(name);
        return std::ofstream(dir / name, std::ios::binary);
    }

    void manifest() {
        json m;
        m["schema"] = "kdvlab-manifest/1";
        m["command"] = command;
        m["version"] = "0.1.0";
        char hb[32];
        std::snprintf(hb, sizeof(hb), "%016llx",
                      static_cast<unsigned long long>(fnv_hash(config_repr)));
        m["config_hash"] = hb;
        m["outputs"] = outputs;
        m["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::ofstream os(dir / "manifest.json", std::ios::binary);
        os << m.dump(2) << "\n";
    }
};

CriticalPair pair_from(int k, int l) { return make_pair(k, l); }

// ---- subcommand bodies -------------------------------------------------------

int run_roots(const Common &c, int count, double zmax, double p) {
    RunContext rc(c, "roots",
                  "roots n=" + std::to_string(count) + " zmax=" + std::to_string(zmax) +
                      " p=" + std::to_string(p) + " seed=" + std::to_string(c.seed));
    auto os = rc.open("roots.csv");
    os << "Re_z,Im_z,Re_l1,Im_l1,Re_l2,Im_l2,Re_l3,Im_l3,max_residual\n";
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> U(-zmax, zmax);
    char buf[512];
    for (int i = 0; i < count; ++i) {
        cplx z(U(rng), U(rng));
        auto r = (p == 0.0) ? solve_cubic(z) : tilde_roots(z, p);
        double res = 0.0;
        for (auto lam : r.lambda) {
            cplx e = (p == 0.0)
                         ? detail::cubic_residual(lam, z)
                         : detail::cubic_residual(std::conj(lam), std::conj(z) - p);
            res = std::max(res, std::abs(e));
        }
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3e\n",
                      z.real(), z.imag(), r.lambda[0].real(), r.lambda[0].imag(),
                      r.lambda[1].real(), r.lambda[1].imag(), r.lambda[2].real(),
                      r.lambda[2].imag(), res);
        os << buf;
    }
    rc.manifest();
    return 0;
}

int run_spectrum(const Common &c, double L, double zlo, double zhi, int n) {
    RunContext rc(c, "spectrum",
                  "spectrum L=" + std::to_string(L) + " zlo=" + std::to_string(zlo) +
                      " zhi=" + std::to_string(zhi) + " n=" + std::to_string(n));
    {
        auto os = rc.open("spectrum.csv");
        os << "z,Re_H,Im_H,abs_H\n";
        char buf[256];
        for (int i = 0; i < n; ++i) {
            const double z = zlo + (zhi - zlo) * i / (n - 1);
            const cplx H = spectral_sample(z, L).H;
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", z,
                          H.real(), H.imag(), std::abs(H));
            os << buf;
        }
    }
    {
        auto zs = find_real_zeros_H(L, zlo, zhi);
        auto os = rc.open("spectrum_zeros.csv");
        os << "z,abs_H,abs_Hprime\n";
        char buf[256];
        for (const auto &zr : zs) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.3e,%.17g\n", zr.z,
                          std::abs(spectral_sample(zr.z, L).H),
                          std::abs(detail::H_deriv(zr.z, L)));
            os << buf;
        }
    }
    rc.manifest();
    return 0;
}

int run_critical(const Common &c, int smax) {
    RunContext rc(c, "critical", "critical smax=" + std::to_string(smax));
    auto pairs = enumerate_pairs(smax);
    if (c.format == "json") {
        json j = json::array();
        for (const auto &p : pairs)
            j.push_back({{"k", p.k},
                         {"l", p.l},
                         {"L", p.L},
                         {"p", p.p},
                         {"Re_E", p.E1},
                         {"Im_E", p.E2},
                         {"dimM", p.dimM},
                         {"obstruction_applies", p.obstruction_applies}});
        auto os = rc.open("critical.json");
        os << j.dump(2) << "\n";
    } else {
        auto os = rc.open("critical.csv");
        write_pairs_csv(os, pairs);
    }
    rc.manifest();
    return 0;
}

int run_simulate(const Common &c, int k, int l, double L, int N, double dt,
                 double T, bool nonlinear, double bc, double bw, double ba) {
    std::ostringstream cfg;
    cfg << "simulate k=" << k << " l=" << l << " L=" << L << " N=" << N
        << " dt=" << dt << " T=" << T << " nl=" << nonlinear << " bump=" << bc
        << "," << bw << "," << ba;
    RunContext rc(c, "simulate", cfg.str());
    if (k > 0) L = pair_from(k, l).L;
    Grid g(L, N, dt, T);
    auto u = bump_control(T, bc * T, bw * T, ba, static_cast<int>(g.steps()) + 1);
    auto tr = nonlinear ? solve_nonlinear(g, {}, u) : solve_linear(g, {}, u);
    auto os = rc.open("trajectory.csv");
    os << "t,state_norm,trace_left,trace_right\n";
    char buf[256];
    const std::size_t stride =
        std::max<std::size_t>(1, tr.states.size() / 2000);
    for (std::size_t m = 0; m < tr.states.size(); m += stride) {
        const double nrm =
            std::sqrt(detail::dot_h(tr.states[m], tr.states[m], g.h));
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n",
                      tr.times[m], nrm, tr.trace_left[m], tr.trace_right[m]);
        os << buf;
    }
    rc.manifest();
    return 0;
}

int run_response(const Common &c, int k, int l, double zmax, double dz) {
    std::ostringstream cfg;
    cfg << "response k=" << k << " l=" << l << " zmax=" << zmax << " dz=" << dz;
    RunContext rc(c, "response", cfg.str());
    auto pr = pair_from(k, l);
    BIntegralTable t(pr, zmax, dz);
    auto os = rc.open("response.csv");
    os << "z,Re_intB,Im_intB\n";
    char buf[256];
    for (int i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", t.z_at(i),
                      t.at(i).real(), t.at(i).imag());
        os << buf;
    }
    rc.manifest();
    return 0;
}

int run_hum(const Common &c, int k, int l, double L, int N, double dt, double T,
            const std::string &target_spec, int max_iter) {
    std::ostringstream cfg;
    cfg << "hum k=" << k << " l=" << l << " L=" << L << " N=" << N
        << " dt=" << dt << " T=" << T << " target=" << target_spec
        << " iters=" << max_iter;
    RunContext rc(c, "hum", cfg.str());
    CriticalPair pr;
    bool have_pair = k > 0;
    if (have_pair) {
        pr = pair_from(k, l);
        L = pr.L;
    }
    Grid g(L, N, dt, T);
    std::vector<double> target(static_cast<std::size_t>(N) - 1);
    if (target_spec.rfind("sin:", 0) == 0) {
        const int m = std::stoi(target_spec.substr(4));
        for (int i = 1; i < N; ++i)
            target[static_cast<std::size_t>(i) - 1] =
                std::sin(2.0 * kl_pi * m * i * g.h / L);
    } else if (target_spec == "one-minus-cos") {
        for (int i = 1; i < N; ++i)
            target[static_cast<std::size_t>(i) - 1] =
                1.0 - std::cos(2.0 * kl_pi * i * g.h / L);
    } else {
        throw CLI::ValidationError("--target must be sin:<m> or one-minus-cos");
    }
    auto h = hum_control(g, target, -1.0, have_pair ? &pr : nullptr, max_iter);
    {
        auto os = rc.open("control.csv");
        os << "t,u\n";
        char buf[128];
        for (std::size_t i = 0; i < h.u.samples.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", i * h.u.dt,
                          h.u.samples[i]);
            os << buf;
        }
    }
    {
        json j;
        j["schema"] = "kdvlab-hum/1";
        j["residual"] = h.residual;
        j["converged"] = h.converged;
        j["iterations"] = h.iterations;
        j["projection_M"] = h.projection_M;
        auto os = rc.open("hum.json");
        os << j.dump(2) << "\n";
    }
    rc.manifest();
    return 0;
}

int run_nullctl(const Common &c, int k, int l, int N, double dt, double T,
                double bc, double bw, double ba, int max_iter) {
    std::ostringstream cfg;
    cfg << "nullctl k=" << k << " l=" << l << " N=" << N << " dt=" << dt
        << " T=" << T << " bump=" << bc << "," << bw << "," << ba
        << " iters=" << max_iter;
    RunContext rc(c, "nullctl", cfg.str());
    auto pr = pair_from(k, l);
    long long steps = std::llround(T / dt);
    if (steps % 2) ++steps;
    Grid g(pr.L, N, T / static_cast<double>(steps), T);
    auto uf = bump_control(T / 2.0, bc, bw, ba,
                           static_cast<int>(g.steps() / 2) + 1);
    auto nc = null_control(g, uf, &pr, 1e-14, max_iter, 1e-9);
    {
        auto os = rc.open("control.csv");
        os << "t,u\n";
        char buf[128];
        for (std::size_t i = 0; i < nc.u.samples.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", i * nc.u.dt,
                          nc.u.samples[i]);
            os << buf;
        }
    }
    {
        json j;
        j["schema"] = "kdvlab-nullctl/1";
        j["residual"] = nc.residual;
        j["met"] = nc.met;
        j["projection_M"] = nc.projection_M;
        auto os = rc.open("nullctl.json");
        os << j.dump(2) << "\n";
    }
    rc.manifest();
    return 0;
}

int run_sweep_like(const Common &c, const std::string &name, int k, int l,
                   std::vector<double> T_list, int samples, bool fine) {
    std::ostringstream cfg;
    cfg << name << " k=" << k << " l=" << l << " samples=" << samples
        << " seed=" << c.seed << " T=";
    for (double t : T_list) cfg << t << ",";
    RunContext rc(c, name, cfg.str());
    auto pr = pair_from(k, l);
    std::sort(T_list.begin(), T_list.end());

    // Dispatch sweep points to a worker pool, then merge in canonical
    // (ascending-T) order.
    std::vector<ObstructionReport> parts(T_list.size());
    {
        std::mutex mu;
        std::size_t next = 0;
        auto worker = [&]() {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lk(mu);
                    if (next >= T_list.size()) return;
                    i = next++;
                }
                parts[i] = sign_definiteness_sweep(
                    pr, {T_list[i]}, samples, c.seed,
                    fine ? default_sweep_options : coarse_sweep_options);
            }
        };
        std::vector<std::thread> pool;
        const int nw = std::min<int>(c.jobs, static_cast<int>(T_list.size()));
        for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
        worker();
        for (auto &t : pool) t.join();
    }
    ObstructionReport rep;
    rep.pair = pr;
    rep.T_list = T_list;
    rep.n_samples = samples;
    rep.seed = c.seed;
    rep.empirical_threshold = -1.0;
    for (auto &p : parts) {
        rep.records.insert(rep.records.end(), p.records.begin(), p.records.end());
        rep.verdicts.insert(rep.verdicts.end(), p.verdicts.begin(),
                            p.verdicts.end());
        if (p.empirical_threshold > 0 &&
            (rep.empirical_threshold < 0 ||
             p.empirical_threshold < rep.empirical_threshold))
            rep.empirical_threshold = p.empirical_threshold;
    }
    if (c.format == "json") {
        auto os = rc.open(name + ".json");
        os << rep.to_json() << "\n";
    } else {
        auto os = rc.open(name + ".csv");
        rep.write_csv(os);
    }
    rc.manifest();
    for (const auto &v : rep.verdicts)
        if (v.kept > 0 && !v.all_positive) return 2;
    return 0;
}

int run_steer(const Common &c, int k, int l, double Tfac, double rho,
              double angle_deg, int N, double dt, int picard) {
    std::ostringstream cfg;
    cfg << "steer k=" << k << " l=" << l << " Tfac=" << Tfac << " rho=" << rho
        << " angle=" << angle_deg << " N=" << N << " dt=" << dt
        << " picard=" << picard;
    RunContext rc(c, "steer", cfg.str());
    auto pr = pair_from(k, l);
    const double T = Tfac * kl_pi / pr.p;
    SteerOptions o;
    o.N = N;
    o.dt = dt;
    o.picard = picard;
    auto mb = m_basis(pr, o.N);
    const double a = angle_deg * kl_pi / 180.0;
    std::vector<double> yT(static_cast<std::size_t>(o.N) - 1);
    for (int i = 0; i < o.N - 1; ++i)
        yT[static_cast<std::size_t>(i)] =
            rho * (std::cos(a) * mb.vecs[0][static_cast<std::size_t>(i)] +
                   std::sin(a) * mb.vecs[1][static_cast<std::size_t>(i)]);
    auto r = nonlinear_steer(pr, {}, yT, T, rho, o);
    {
        auto os = rc.open("steer_residuals.csv");
        os << "iteration,residual\n";
        char buf[128];
        for (std::size_t i = 0; i < r.residuals.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, r.residuals[i]);
            os << buf;
        }
    }
    {
        json j;
        j["schema"] = "kdvlab-steer/1";
        j["residuals"] = r.residuals;
        j["diverged"] = r.diverged;
        j["rotation_error_rad"] = r.rotation_error;
        auto os = rc.open("steer.json");
        os << j.dump(2) << "\n";
    }
    rc.manifest();
    return r.diverged ? 2 : 0;
}

int run_toy(const Common &c, bool check, double T, int samples) {
    std::ostringstream cfg;
    cfg << "toy check=" << check << " T=" << T << " samples=" << samples
        << " seed=" << c.seed;
    RunContext rc(c, "toy", cfg.str());
    auto rep = toy_obstruction_check(T, samples, c.seed);
    {
        auto os = rc.open("toy.csv");
        rep.write_csv(os);
    }
    {
        json j;
        j["schema"] = "kdvlab-toy/1";
        j["T"] = rep.T;
        j["y2_violations"] = rep.y2_violations;
        j["y3_violations"] = rep.y3_violations;
        j["delta2_hat"] = rep.delta2_hat;
        j["delta3_hat"] = rep.delta3_hat;
        j["optimizer_ran"] = rep.optimizer_ran;
        j["positive_y3_found"] = rep.positive_y3_found;
        j["best_y3"] = rep.best_y3;
        auto os = rc.open("toy_verdicts.json");
        os << j.dump(2) << "\n";
    }
    rc.manifest();
    if (check && (rep.y2_violations > 0 || rep.y3_violations > 0)) return 2;
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"KdV boundary-control laboratory"};
    app.require_subcommand(1);
    // TOML config: keys live in a [subcommand] section, e.g.
    //   [roots]
    //   count = 3
    // Unknown keys are rejected.
    app.set_config("--config", "", "TOML config file ([subcommand] sections)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    Common c;

    // roots
    auto *roots = app.add_subcommand("roots", "characteristic cubic roots");
    int roots_n = 100;
    double roots_zmax = 100.0, roots_p = 0.0;
    roots->add_option("--count", roots_n);
    roots->add_option("--zmax", roots_zmax);
    roots->add_option("--p", roots_p, "frequency shift for the conjugate family");
    add_common(roots, c);

    // spectrum
    auto *spec = app.add_subcommand("spectrum", "transfer function on the real axis");
    double sp_L = 2.0 * kl_pi, sp_lo = -3.0, sp_hi = 3.0;
    int sp_n = 1201;
    spec->add_option("--L", sp_L);
    spec->add_option("--zlo", sp_lo);
    spec->add_option("--zhi", sp_hi);
    spec->add_option("--n", sp_n);
    add_common(spec, c);

    // critical
    auto *crit = app.add_subcommand("critical", "critical-pair catalogue");
    int crit_smax = 100;
    crit->add_option("--smax", crit_smax)->check(CLI::PositiveNumber);
    add_common(crit, c);

    // simulate
    auto *sim = app.add_subcommand("simulate", "run the initial-boundary solver");
    int sim_k = 0, sim_l = 0, sim_N = 128;
    double sim_L = 2.0 * kl_pi, sim_dt = 1e-3, sim_T = 2.0;
    bool sim_nl = false;
    double sim_bc = 0.5, sim_bw = 0.2, sim_ba = 0.5;
    sim->add_option("--k", sim_k);
    sim->add_option("--l", sim_l);
    sim->add_option("--L", sim_L);
    sim->add_option("--N", sim_N);
    sim->add_option("--dt", sim_dt);
    sim->add_option("--T", sim_T);
    sim->add_flag("--nonlinear", sim_nl);
    sim->add_option("--bump-center", sim_bc, "bump center as a fraction of T");
    sim->add_option("--bump-width", sim_bw, "bump half-width as a fraction of T");
    sim->add_option("--bump-amp", sim_ba);
    add_common(sim, c);

    // response
    auto *resp = app.add_subcommand("response", "kernel integral over frequency");
    int r_k = 2, r_l = 1;
    double r_zmax = 10.0, r_dz = 0.05;
    resp->add_option("--k", r_k);
    resp->add_option("--l", r_l);
    resp->add_option("--zmax", r_zmax);
    resp->add_option("--dz", r_dz);
    add_common(resp, c);

    // hum
    auto *hum = app.add_subcommand("hum", "minimum-norm terminal control");
    int h_k = 0, h_l = 0, h_N = 256, h_it = 200;
    double h_L = 2.0 * kl_pi, h_dt = 2e-3, h_T = 2.0;
    std::string h_target = "sin:1";
    hum->add_option("--k", h_k);
    hum->add_option("--l", h_l);
    hum->add_option("--L", h_L);
    hum->add_option("--N", h_N);
    hum->add_option("--dt", h_dt);
    hum->add_option("--T", h_T);
    hum->add_option("--target", h_target, "sin:<m> or one-minus-cos");
    hum->add_option("--iters", h_it);
    add_common(hum, c);

    // nullctl
    auto *nc = app.add_subcommand("nullctl", "bump + return-to-zero control");
    int n_k = 2, n_l = 1, n_N = 96, n_it = 600;
    double n_dt = 2e-3, n_T = 2.0, n_bc = 0.5, n_bw = 0.25, n_ba = 0.5;
    nc->add_option("--k", n_k);
    nc->add_option("--l", n_l);
    nc->add_option("--N", n_N);
    nc->add_option("--dt", n_dt);
    nc->add_option("--T", n_T);
    nc->add_option("--bump-center", n_bc);
    nc->add_option("--bump-width", n_bw);
    nc->add_option("--bump-amp", n_ba);
    nc->add_option("--iters", n_it);
    add_common(nc, c);

    // obstruction / monotone / sweep
    auto *obs = app.add_subcommand("obstruction", "sign-definiteness sweep");
    int o_k = 2, o_l = 1, o_samples = 50;
    std::vector<double> o_T = {0.25, 0.5, 1.0};
    obs->add_option("--k", o_k);
    obs->add_option("--l", o_l);
    obs->add_option("--T", o_T)->delimiter(',');
    obs->add_option("--samples", o_samples);
    add_common(obs, c);

    auto *mono = app.add_subcommand("monotone", "normalized-ratio sweep");
    int m_k = 2, m_l = 1, m_samples = 20;
    std::vector<double> m_T = {0.5, 0.25, 0.1};
    mono->add_option("--k", m_k);
    mono->add_option("--l", m_l);
    mono->add_option("--T", m_T)->delimiter(',');
    mono->add_option("--samples", m_samples);
    add_common(mono, c);

    auto *sw = app.add_subcommand("sweep", "sign-definiteness sweep over many T");
    int s_k = 2, s_l = 1, s_samples = 25;
    std::vector<double> s_T = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    sw->add_option("--k", s_k);
    sw->add_option("--l", s_l);
    sw->add_option("--T", s_T)->delimiter(',');
    sw->add_option("--samples", s_samples);
    add_common(sw, c);

    // steer
    auto *st = app.add_subcommand("steer", "fixed-point steering into M");
    int st_k = 2, st_l = 1, st_N = 96, st_picard = 4;
    double st_T = 1.2, st_rho = 1e-3, st_angle = 0.0, st_dt = 2e-3;
    st->add_option("--k", st_k);
    st->add_option("--l", st_l);
    st->add_option("--Tfactor", st_T, "horizon as a multiple of pi/p");
    st->add_option("--rho", st_rho);
    st->add_option("--angle", st_angle, "target angle in the M plane (deg)");
    st->add_option("--N", st_N);
    st->add_option("--dt", st_dt);
    st->add_option("--picard", st_picard);
    add_common(st, c);

    // toy
    auto *toy = app.add_subcommand("toy", "finite-dimensional model checks");
    bool t_check = false;
    double t_T = kl_pi;
    int t_samples = 200;
    toy->add_flag("--check", t_check);
    toy->add_option("--T", t_T);
    toy->add_option("--samples", t_samples);
    add_common(toy, c);

    try {
        app.parse(argc, argv);
        apply_env_seed(c);
        if (roots->parsed()) return run_roots(c, roots_n, roots_zmax, roots_p);
        if (spec->parsed()) return run_spectrum(c, sp_L, sp_lo, sp_hi, sp_n);
        if (crit->parsed()) return run_critical(c, crit_smax);
        if (sim->parsed())
            return run_simulate(c, sim_k, sim_l, sim_L, sim_N, sim_dt, sim_T,
                                sim_nl, sim_bc, sim_bw, sim_ba);
        if (resp->parsed()) return run_response(c, r_k, r_l, r_zmax, r_dz);
        if (hum->parsed())
            return run_hum(c, h_k, h_l, h_L, h_N, h_dt, h_T, h_target, h_it);
        if (nc->parsed())
            return run_nullctl(c, n_k, n_l, n_N, n_dt, n_T, n_bc, n_bw, n_ba,
                               n_it);
        if (obs->parsed())
            return run_sweep_like(c, "obstruction", o_k, o_l, o_T, o_samples,
                                  false);
        if (mono->parsed())
            return run_sweep_like(c, "monotone", m_k, m_l, m_T, m_samples, true);
        if (sw->parsed())
            return run_sweep_like(c, "sweep", s_k, s_l, s_T, s_samples, false);
        if (st->parsed())
            return run_steer(c, st_k, st_l, st_T, st_rho, st_angle, st_N, st_dt,
                             st_picard);
        if (toy->parsed()) return run_toy(c, t_check, t_T, t_samples);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) ? 1 : 0;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
