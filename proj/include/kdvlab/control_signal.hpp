/*
 * control_signal.hpp — sampled boundary control u(t) on a uniform grid of
 * [0, T], extended by zero outside.  Shared by the time-domain solvers and
 * the control synthesis tools.
 */

#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvlab {

struct ControlSignal {
    std::vector<double> samples;  // values at t = n·dt, n = 0..size-1
    double dt = 0.0;
    double T = 0.0;

    ControlSignal() = default;

    ControlSignal(std::vector<double> s, double horizon)
        : samples(std::move(s)), T(horizon) {
        if (samples.size() < 2 || !(horizon > 0.0))
            throw std::domain_error("ControlSignal: need >= 2 samples, T > 0");
        dt = T / static_cast<double>(samples.size() - 1);
        for (double v : samples)
            if (!std::isfinite(v))
                throw std::domain_error("ControlSignal: non-finite sample");
    }

    ControlSignal(const std::function<double(double)> &f, double horizon, int n) {
        if (n < 2 || !(horizon > 0.0))
            throw std::domain_error("ControlSignal: need >= 2 samples, T > 0");
        T = horizon;
        dt = T / (n - 1);
        samples.resize(n);
        for (int i = 0; i < n; ++i) samples[i] = f(i * dt);
        for (double v : samples)
            if (!std::isfinite(v))
                throw std::domain_error("ControlSignal: non-finite sample");
    }

    static ControlSignal zero(double horizon, int n) {
        return ControlSignal(std::vector<double>(static_cast<std::size_t>(n), 0.0),
                             horizon);
    }

    // Piecewise-linear value, zero outside [0, T].
    double value(double t) const {
        if (samples.empty() || t < 0.0 || t > T) return 0.0;
        const double s = t / dt;
        const auto i = static_cast<std::size_t>(s);
        if (i + 1 >= samples.size()) return samples.back();
        const double w = s - static_cast<double>(i);
        return (1.0 - w) * samples[i] + w * samples[i + 1];
    }

    double l2_norm() const {
        double acc = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double w = (i == 0 || i + 1 == samples.size()) ? 0.5 : 1.0;
            acc += w * samples[i] * samples[i];
        }
        return std::sqrt(acc * dt);
    }

    void write_csv(std::ostream &os) const {
        os << "t,u\n";
        char buf[80];
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", i * dt, samples[i]);
            os << buf;
        }
    }

    static ControlSignal read_csv(std::istream &is) {
        std::string line;
        if (!std::getline(is, line) || line != "t,u")
            throw std::runtime_error("ControlSignal: bad CSV header");
        std::vector<double> ts, us;
        while (std::getline(is, line)) {
            double t, u;
            if (std::sscanf(line.c_str(), "%lf,%lf", &t, &u) != 2)
                throw std::runtime_error("ControlSignal: bad CSV row: " + line);
            ts.push_back(t);
            us.push_back(u);
        }
        if (ts.size() < 2) throw std::runtime_error("ControlSignal: too few rows");
        return ControlSignal(std::move(us), ts.back());
    }
};

} // namespace kdvlab
