#pragma once

// 1-D point mass dropped onto compliant ground: free fall above z = 0,
// critically damped spring-damper below. The map zdot_t -> zdot_{t+1} after a
// fixed 1 s of flight is the stiff regression target of the 1-D study.

#include <cstdint>
#include <vector>

#include "stiffdyn/rng.hpp"

namespace stiffdyn {

struct State1D {
    double z = 0.0;     // m
    double zdot = 0.0;  // m/s
};

struct Config1D {
    double k = 2500.0;        // N/(kg m)
    double duration = 1.0;    // s
    double noise_var = 0.01;  // (m/s)^2, gaussian, added to both velocities
    double zdot_lo = -3.0;    // m/s, initial-velocity range
    double zdot_hi = 5.0;
    double z0 = 1.0;          // m, drop height
};

// Piecewise acceleration: -9.81 above ground, spring-damper + gravity below.
double accel_1d(const State1D& s, double k);

// Classical RK4 at fixed step h = min(1e-4, 0.01/sqrt(k)) over cfg.duration;
// the step resolves the 1/sqrt(k) contact time constant by >= 100x. Steps
// that straddle the z = 0 kink are split at the crossing, keeping full order.
State1D integrate_1d(const State1D& s0, const Config1D& cfg);

// Same integration with an explicit base step, for convergence checks.
State1D integrate_1d_with_step(const State1D& s0, const Config1D& cfg, double h);

// n pairs (zdot_t, zdot_{t+1}) with zdot_t ~ U([lo, hi]) and gaussian noise on
// both entries.
std::vector<std::pair<double, double>> sample_1d_dataset(int n, const Config1D& cfg, Rng& rng);

}  // namespace stiffdyn
