#include "stiffdyn/cube_sim.hpp"

#include <algorithm>
#include <cmath>

namespace stiffdyn {

std::array<Vec3, 8> corner_offsets(const SystemParams& prm) {
    const double h = 0.5 * prm.l;
    std::array<Vec3, 8> d;
    for (int i = 0; i < 8; ++i) {
        d[i] = {(i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h};
    }
    return d;
}

std::array<Vec3, 8> corner_positions(const State& s, const SystemParams& prm) {
    const auto d = corner_offsets(prm);
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i) {
        c[i] = s.p + rotate(s.q, d[i]);
    }
    return c;
}

namespace {

struct InstantForces {
    Vec3 force;   // world
    Vec3 torque;  // body
};

// Instantaneous contact force and torque for one state.
InstantForces instant_contact(const State& s, const SystemParams& prm, double dt_sub) {
    const auto d = corner_offsets(prm);
    const auto c = corner_positions(s, prm);
    const double b = prm.damping();
    const double c_t = prm.friction_reg();

    int n_active = 0;
    for (int i = 0; i < 8; ++i) {
        if (c[i].z < 0.0) ++n_active;
    }
    InstantForces out;
    if (n_active == 0) {
        return out;
    }
    const double m_eff = prm.m / n_active;
    const Quat q_inv = s.q.conjugate();

    for (int i = 0; i < 8; ++i) {
        if (c[i].z >= 0.0) {
            continue;
        }
        const double r = -c[i].z;
        // Corner velocity in world frame: pdot + R(omega x d_i).
        const Vec3 v_corner = s.pdot + rotate(s.q, cross(s.omega, d[i]));
        const double rdot = -v_corner.z;

        // Gravity-blended spring-damper normal force, clamped so contact
        // never pulls. Realizes rddot = (1-d) g - d (k r + b rdot), keeping
        // the static sag at g(1-d)/(d k) instead of the pure-penalty g/k.
        const double f_n =
            m_eff * prm.impedance * std::max(0.0, prm.g + prm.k * r + b * rdot);

        // Regularized Coulomb friction against the tangential corner
        // velocity. The last bound stops the corner within one sub-step
        // through its effective mass (lever coupling included) instead of
        // reversing it.
        Vec3 f = {0.0, 0.0, f_n};
        const Vec3 v_t = {v_corner.x, v_corner.y, 0.0};
        const double v_t_norm = norm(v_t);
        if (v_t_norm > 1e-12) {
            const Vec3 t_body = rotate(q_inv, v_t / v_t_norm);
            const Vec3 lever = cross(d[i], t_body);
            const double w_t = 1.0 / prm.m + dot(lever, lever) / prm.inertia;
            const double f_t = std::min({prm.mu * f_n, m_eff * c_t * v_t_norm,
                                         v_t_norm / (w_t * dt_sub)});
            f -= (f_t / v_t_norm) * v_t;
        }

        out.force += f;
        out.torque += cross(d[i], rotate(q_inv, f));
    }
    return out;
}

// Lowest reachable corner height over one step, used to skip the contact
// sub-grid when the cube cannot possibly touch down.
double contact_clearance(const State& s, const SystemParams& prm) {
    const double radius = std::sqrt(3.0) / 2.0 * prm.l;
    const double reach =
        (norm(s.pdot) + norm(s.omega) * radius) * prm.dt + 0.5 * prm.g * prm.dt * prm.dt;
    return s.p.z - radius - reach;
}

}  // namespace

ContactResult contact_forces(const State& s, const SystemParams& prm) {
    ContactResult out;
    out.penetrations.fill(0.0);
    const auto c = corner_positions(s, prm);
    for (int i = 0; i < 8; ++i) {
        out.penetrations[i] = std::max(0.0, -c[i].z);
        out.max_penetration = std::max(out.max_penetration, out.penetrations[i]);
    }

    if (contact_clearance(s, prm) > 0.0) {
        return out;
    }

    // Average the instantaneous forces over an inner sub-grid fine enough to
    // resolve the damped corner transient.
    const int n_sub = std::max(1, prm.contact_substeps);
    const double dt_sub = prm.dt / n_sub;
    State inner = s;
    Vec3 force_sum, torque_sum;
    for (int j = 0; j < n_sub; ++j) {
        const InstantForces inst = instant_contact(inner, prm, dt_sub);
        force_sum += inst.force;
        torque_sum += inst.torque;
        inner.pdot += (inst.force / prm.m - Vec3{0.0, 0.0, prm.g}) * dt_sub;
        inner.omega += (inst.torque / prm.inertia) * dt_sub;
        inner.p += inner.pdot * dt_sub;
        inner.q = normalized(quat_mul(inner.q, quat_exp(inner.omega * dt_sub)));
        out.max_penetration = std::max(out.max_penetration, state_penetration(inner, prm));
    }
    out.force = force_sum / n_sub;
    out.torque = torque_sum / n_sub;
    return out;
}

namespace {

State apply_step(const State& s, const ContactResult& contact, const SystemParams& prm) {
    State next;
    next.pdot = s.pdot + (contact.force / prm.m - Vec3{0.0, 0.0, prm.g}) * prm.dt;
    // No Coriolis term: scalar inertia of the symmetric cube.
    next.omega = s.omega + (contact.torque / prm.inertia) * prm.dt;
    next.p = s.p + next.pdot * prm.dt;
    next.q = normalized(quat_mul(s.q, quat_exp(next.omega * prm.dt)));
    return next;
}

}  // namespace

State step(const State& s, const SystemParams& prm) {
    return apply_step(s, contact_forces(s, prm), prm);
}

double state_penetration(const State& s, const SystemParams& prm) {
    double max_pen = 0.0;
    for (const Vec3& c : corner_positions(s, prm)) {
        max_pen = std::max(max_pen, -c.z);
    }
    return max_pen;
}

namespace {

bool diverged(const State& s) {
    const auto a = s.to_array();
    for (double v : a) {
        if (!std::isfinite(v) || std::abs(v) > 1e6) {
            return true;
        }
    }
    return false;
}

}  // namespace

Trajectory simulate(const State& x0, const SystemParams& prm, int n_steps,
                    std::uint64_t seed) {
    Trajectory traj;
    traj.params = prm;
    traj.seed = seed;
    traj.states.reserve(n_steps);
    traj.states.push_back(x0);
    traj.max_penetration = state_penetration(x0, prm);
    for (int t = 1; t < n_steps; ++t) {
        const ContactResult contact = contact_forces(traj.states.back(), prm);
        State next = apply_step(traj.states.back(), contact, prm);
        if (diverged(next)) {
            throw DivergedError("simulate: state diverged at step " + std::to_string(t));
        }
        traj.max_penetration = std::max(traj.max_penetration, contact.max_penetration);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

Vel6 oracle_predict(const State& s, const SystemParams& prm) {
    const State next = step(s, prm);
    return {next.pdot, next.omega};
}

}  // namespace stiffdyn
