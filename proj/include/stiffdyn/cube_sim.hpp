#pragma once

// Semi-implicit compliant-contact simulator for a single rigid cube on flat
// ground. Contact is a per-corner Baumgarte penalty: each penetrating corner
// feels a normal force m_eff * d * max(0, g + k r + b rdot), i.e. the blended
// penetration dynamics rddot = (1-d) g - d (k r + b rdot) with constant
// impedance d, plus regularized Coulomb friction. Corners share the cube's
// mass equally.
//
// F and tau in the velocity update are the average contact force and torque
// over the time step; contact_forces resolves them on an internal sub-grid,
// since the damped contact transient (time constant 1/sqrt(k), times a corner
// lever coupling of up to ~3x) is too stiff to sample once per dt without
// pumping energy into the tumble. The same stepper doubles as the one-step
// oracle predictor used as a baseline for learned models.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stiffdyn/math.hpp"

namespace stiffdyn {

struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 13-dimensional rigid-body state: position, orientation (unit quaternion,
// wxyz), world-frame linear velocity, body-frame angular velocity.
struct State {
    Vec3 p;
    Quat q;
    Vec3 pdot;
    Vec3 omega;

    std::array<double, 13> to_array() const {
        return {p.x, p.y, p.z, q.w, q.x, q.y, q.z,
                pdot.x, pdot.y, pdot.z, omega.x, omega.y, omega.z};
    }
    static State from_array(const std::array<double, 13>& a) {
        return {{a[0], a[1], a[2]}, {a[3], a[4], a[5], a[6]},
                {a[7], a[8], a[9]}, {a[10], a[11], a[12]}};
    }
};

struct SystemParams {
    double m = 0.37;        // kg
    double inertia = 6.167e-4;  // kg m^2, scalar (symmetric cube)
    double l = 0.1;         // m, side length
    double g = 9.81;        // m/s^2
    double mu = 1.0;        // friction coefficient
    double k = 2500.0;      // N/(kg m), contact stiffness
    double zeta = 1.04;     // damping ratio
    double dt = 6.74e-3;    // s
    double c_t = 0.0;       // 1/s, friction regularization; 0 -> 100*sqrt(k)
    double impedance = 0.95;  // gravity-cancellation blend d in [0, 1]
    int contact_substeps = 16;  // inner resolution for the per-step force average

    double damping() const { return 2.0 * zeta * std::sqrt(k); }
    double friction_reg() const { return c_t > 0.0 ? c_t : 100.0 * std::sqrt(k); }

    // Static rest penetration of the blended contact law: d(g + k r) = g.
    double rest_penetration() const { return g * (1.0 - impedance) / (impedance * k); }

    static SystemParams with_stiffness(double k_) {
        SystemParams prm;
        prm.k = k_;
        return prm;
    }
};

inline constexpr double kStiffnessHard = 2500.0;
inline constexpr double kStiffnessMedium = 300.0;
inline constexpr double kStiffnessSoft = 100.0;

struct ContactResult {
    Vec3 force;                          // N, world frame, total
    Vec3 torque;                         // N m, body frame, total
    std::array<double, 8> penetrations;  // m, per corner at the step start, >= 0
    double max_penetration = 0.0;        // m, deepest corner over the sub-grid
};

struct Trajectory {
    std::vector<State> states;
    SystemParams params;
    std::uint64_t seed = 0;
    double max_penetration = 0.0;  // m, over all steps and corners
};

// Velocity pair [pdot; omega] as predicted for the next step.
struct Vel6 {
    Vec3 lin;
    Vec3 ang;

    std::array<double, 6> to_array() const {
        return {lin.x, lin.y, lin.z, ang.x, ang.y, ang.z};
    }
};

// Body-frame corner offsets, ±l/2 per axis, indexed by bit pattern (x:1, y:2, z:4).
std::array<Vec3, 8> corner_offsets(const SystemParams& prm);

// World-frame corner positions p + R(q) d_i.
std::array<Vec3, 8> corner_positions(const State& s, const SystemParams& prm);

ContactResult contact_forces(const State& s, const SystemParams& prm);

// One semi-implicit step: velocities from current-state forces, then
// configuration from the new velocities; quaternion renormalized.
State step(const State& s, const SystemParams& prm);

// Largest corner penetration depth of a single state (0 when airborne).
double state_penetration(const State& s, const SystemParams& prm);

// n_steps states (n_steps - 1 steps). Throws DivergedError if any component
// exceeds 1e6 in magnitude or becomes non-finite.
Trajectory simulate(const State& x0, const SystemParams& prm, int n_steps = 80,
                    std::uint64_t seed = 0);

// Next-step velocity [pdot'; omega'] from the current state alone.
Vel6 oracle_predict(const State& s, const SystemParams& prm);

}  // namespace stiffdyn
