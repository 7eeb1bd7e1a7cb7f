#include "stiffdyn/point_mass_1d.hpp"

#include <algorithm>
#include <cmath>

namespace stiffdyn {

double accel_1d(const State1D& s, double k) {
    if (s.z > 0.0) {
        return -9.81;
    }
    return -k * s.z - 2.0 * std::sqrt(k) * s.zdot - 9.81;
}

namespace {

// The acceleration jumps by 2*sqrt(k)*zdot across z = 0, so a straddling RK4
// step whose substages sample both branches collapses to first order. The
// integrator therefore runs phase-pinned: each step evaluates one branch only,
// and ground crossings are located by bisection on the pinned dynamics before
// flipping the phase.

enum class Phase { Free, Contact };

double pinned_accel(const State1D& s, double k, Phase phase) {
    if (phase == Phase::Free) {
        return -9.81;
    }
    return -k * s.z - 2.0 * std::sqrt(k) * s.zdot - 9.81;
}

State1D rk4_step(const State1D& s, double k, Phase phase, double h) {
    const auto deriv = [k, phase](const State1D& x) -> State1D {
        return {x.zdot, pinned_accel(x, k, phase)};
    };
    const State1D k1 = deriv(s);
    const State1D k2 = deriv({s.z + 0.5 * h * k1.z, s.zdot + 0.5 * h * k1.zdot});
    const State1D k3 = deriv({s.z + 0.5 * h * k2.z, s.zdot + 0.5 * h * k2.zdot});
    const State1D k4 = deriv({s.z + h * k3.z, s.zdot + h * k3.zdot});
    return {s.z + h / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
            s.zdot + h / 6.0 * (k1.zdot + 2.0 * k2.zdot + 2.0 * k3.zdot + k4.zdot)};
}

bool in_free_half(const State1D& s) { return s.z > 0.0; }

}  // namespace

State1D integrate_1d(const State1D& s0, const Config1D& cfg) {
    return integrate_1d_with_step(s0, cfg, std::min(1e-4, 0.01 / std::sqrt(cfg.k)));
}

State1D integrate_1d_with_step(const State1D& s0, const Config1D& cfg, double h) {
    State1D s = s0;
    Phase phase = in_free_half(s) ? Phase::Free : Phase::Contact;
    double remaining = cfg.duration;
    int consecutive_crossings = 0;
    while (remaining > 1e-15) {
        const double len = std::min(h, remaining);
        const State1D trial = rk4_step(s, cfg.k, phase, len);
        const bool started_free = (phase == Phase::Free);
        if (in_free_half(trial) != started_free && len > 1e-13 &&
            consecutive_crossings < 8) {
            // Bisect the step length to the crossing, still on the pinned
            // branch, then switch phase from the boundary.
            double lo = 0.0, hi = len;
            for (int it = 0; it < 60 && hi - lo > 1e-16 * h; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (in_free_half(rk4_step(s, cfg.k, phase, mid)) != started_free) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            s = rk4_step(s, cfg.k, phase, hi);
            s.z = 0.0;
            phase = started_free ? Phase::Contact : Phase::Free;
            remaining -= hi;
            ++consecutive_crossings;
        } else {
            s = trial;
            phase = in_free_half(s) ? Phase::Free : Phase::Contact;
            remaining -= len;
            consecutive_crossings = 0;
        }
    }
    return s;
}

std::vector<std::pair<double, double>> sample_1d_dataset(int n, const Config1D& cfg, Rng& rng) {
    const double sigma = std::sqrt(cfg.noise_var);
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double zdot_t = rng.uniform(cfg.zdot_lo, cfg.zdot_hi);
        const State1D final = integrate_1d({cfg.z0, zdot_t}, cfg);
        pairs.emplace_back(zdot_t + rng.normal(0.0, sigma),
                           final.zdot + rng.normal(0.0, sigma));
    }
    return pairs;
}

}  // namespace stiffdyn
