#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stiffdyn/cube_sim.hpp"
#include "stiffdyn/rng.hpp"

using namespace stiffdyn;

namespace {

State resting_state(const SystemParams& prm) {
    // Flat on the ground, sunk to the static equilibrium depth of the
    // blended contact law: d (g + k r) = g.
    State s;
    s.p = {0.0, 0.0, 0.5 * prm.l - prm.rest_penetration()};
    return s;
}

double mechanical_energy(const State& s, const SystemParams& prm) {
    const double ke_lin = 0.5 * prm.m * dot(s.pdot, s.pdot);
    const double ke_ang = 0.5 * prm.inertia * dot(s.omega, s.omega);
    return ke_lin + ke_ang + prm.m * prm.g * s.p.z;
}

}  // namespace

TEST_CASE("corner positions: resting pose and bounding sphere") {
    SystemParams prm;
    State s;
    s.p = {0.0, 0.0, 0.5 * prm.l};
    const auto c = corner_positions(s, prm);
    int at_zero = 0, at_l = 0;
    for (const auto& v : c) {
        if (std::abs(v.z) < 1e-12) ++at_zero;
        if (std::abs(v.z - prm.l) < 1e-12) ++at_l;
    }
    CHECK(at_zero == 4);
    CHECK(at_l == 4);

    Rng rng(1);
    const double radius = std::sqrt(3.0) / 2.0 * prm.l;
    for (int it = 0; it < 100; ++it) {
        State r;
        r.p = {0.0, 0.0, 1.0};
        r.q = quat_exp({rng.symmetric(3.0), rng.symmetric(3.0), rng.symmetric(3.0)});
        for (const auto& v : corner_positions(r, prm)) {
            CHECK(v.z >= 1.0 - radius - 1e-12);
            CHECK(v.z <= 1.0 + radius + 1e-12);
        }
    }
}

TEST_CASE("corner positions: 45 degree rotation lowest corner") {
    SystemParams prm;
    State s;
    s.q = quat_exp({M_PI / 4, 0, 0});
    double lowest = 1e9;
    for (const auto& v : corner_positions(s, prm)) {
        lowest = std::min(lowest, v.z);
    }
    CHECK(lowest == doctest::Approx(-0.07071067811865475).epsilon(1e-12));
}

TEST_CASE("contact: airborne cube feels nothing") {
    SystemParams prm;
    State s;
    s.p = {0, 0, 1.0};
    s.omega = {1, 2, 3};
    const auto res = contact_forces(s, prm);
    CHECK(norm(res.force) == 0.0);
    CHECK(norm(res.torque) == 0.0);
    for (double r : res.penetrations) CHECK(r == 0.0);
}

TEST_CASE("contact: static equilibrium balances gravity at d(g + k r) = g") {
    SystemParams prm;  // Hard, k = 2500
    // Pure-penalty balance k r = g would sit at 3.924 mm; the blended law
    // rests at (1-d)/d of that.
    CHECK(prm.g / prm.k == doctest::Approx(0.003924));
    CHECK(prm.rest_penetration() ==
          doctest::Approx(0.003924 * 0.05 / 0.95).epsilon(1e-12));
    const State s = resting_state(prm);
    const auto res = contact_forces(s, prm);
    CHECK(res.force.z == doctest::Approx(prm.m * prm.g).epsilon(1e-12));
    CHECK(std::abs(res.force.x) < 1e-15);
    CHECK(std::abs(res.force.y) < 1e-15);
    // Symmetric rest: no torque.
    CHECK(norm(res.torque) < 1e-15);
}

TEST_CASE("step: free fall matches closed form") {
    SystemParams prm;
    State s;
    s.p = {0, 0, 1.0};
    const State next = step(s, prm);
    CHECK(next.pdot.z == doctest::Approx(-0.06611940000000001).epsilon(1e-15));
    CHECK(next.p.z == doctest::Approx(0.999554355244).epsilon(1e-15));
    // No rotation without torque.
    CHECK(next.q.w == doctest::Approx(1.0));
    CHECK(norm(next.omega) == 0.0);
}

TEST_CASE("step: resting equilibrium is a fixed point") {
    for (double k : {kStiffnessSoft, kStiffnessMedium, kStiffnessHard}) {
        const SystemParams prm = SystemParams::with_stiffness(k);
        const State s = resting_state(prm);
        const State next = step(s, prm);
        CHECK(std::abs(next.p.z - s.p.z) < 1e-9);
        CHECK(norm(next.pdot) < 1e-9);
        CHECK(norm(next.omega) < 1e-9);
        CHECK(quat_angle_deg(next.q, s.q) < 1e-9);
    }
}

TEST_CASE("step is deterministic (bit-identical)") {
    SystemParams prm;
    State s;
    s.p = {0.02, -0.01, 0.04};
    s.q = normalized({0.9, 0.1, -0.2, 0.3});
    s.pdot = {0.5, -0.2, -1.0};
    s.omega = {3.0, -2.0, 1.0};
    const State a = step(s, prm);
    const State b = step(s, prm);
    const auto aa = a.to_array();
    const auto bb = b.to_array();
    for (int i = 0; i < 13; ++i) {
        CHECK(aa[i] == bb[i]);
    }
}

TEST_CASE("ballistic phase: exact momentum update, constant omega") {
    SystemParams prm;
    State s;
    s.p = {0, 0, 5.0};
    s.pdot = {0.3, 0.1, 1.0};
    s.omega = {2.0, -1.0, 0.5};
    State cur = s;
    for (int t = 0; t < 10; ++t) {
        const State next = step(cur, prm);
        CHECK(next.pdot.z == cur.pdot.z - prm.g * prm.dt);
        CHECK(next.pdot.x == cur.pdot.x);
        CHECK(next.omega.x == cur.omega.x);
        CHECK(next.omega.y == cur.omega.y);
        CHECK(next.omega.z == cur.omega.z);
        cur = next;
    }
}

TEST_CASE("quaternion norm stays unit over 1000 steps") {
    SystemParams prm;
    State s;
    s.p = {0, 0, 0.12};
    s.q = normalized({-0.525, 0.394, -0.296, -0.678});
    s.pdot = {0.014, 1.291, -0.212};
    s.omega = {1.463, -4.854, 9.870};
    State cur = s;
    for (int t = 0; t < 1000; ++t) {
        cur = step(cur, prm);
        CHECK(std::abs(norm(cur.q) - 1.0) < 1e-9);
    }
}

TEST_CASE("impact dissipates mechanical energy at zeta = 1.04") {
    SystemParams prm;
    Rng rng(7);
    int impacts_checked = 0;
    for (int it = 0; it < 20; ++it) {
        State s;
        s.p = {0, 0, rng.uniform(0.15, 0.3)};
        s.q = normalized({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
        s.pdot = {rng.symmetric(0.2), rng.symmetric(0.2), rng.uniform(-1.0, 0.0)};
        s.omega = {rng.symmetric(3.0), rng.symmetric(3.0), rng.symmetric(3.0)};
        const Trajectory traj = simulate(s, prm, 80);

        // Energy at the first airborne instant vs. any later airborne instant.
        double e_before = -1.0;
        bool touched = false;
        for (const State& st : traj.states) {
            const bool in_contact = state_penetration(st, prm) > 0.0;
            if (!in_contact && e_before < 0.0) {
                e_before = mechanical_energy(st, prm);
            } else if (in_contact) {
                touched = true;
            } else if (touched && e_before >= 0.0) {
                CHECK(mechanical_energy(st, prm) < e_before);
                ++impacts_checked;
                break;
            }
        }
    }
    CHECK(impacts_checked > 5);
}

TEST_CASE("simulate: cube at rest stays at rest") {
    SystemParams prm;
    const State s = resting_state(prm);
    const Trajectory traj = simulate(s, prm, 80);
    REQUIRE(traj.states.size() == 80);
    for (const State& st : traj.states) {
        CHECK(std::abs(st.p.z - s.p.z) < 1e-6);
        CHECK(norm(st.pdot) < 1e-6);
        CHECK(norm(st.omega) < 1e-6);
    }
}

TEST_CASE("simulate: nominal drop penetration per stiffness") {
    State x0;
    x0.p = {0.186, 0.026, 0.122};
    x0.q = normalized({-0.525, 0.394, -0.296, -0.678});
    x0.pdot = {0.014, 1.291, -0.212};
    x0.omega = {1.463, -4.854, 9.870};

    const Trajectory hard = simulate(x0, SystemParams::with_stiffness(kStiffnessHard), 80);
    const Trajectory medium = simulate(x0, SystemParams::with_stiffness(kStiffnessMedium), 80);
    const Trajectory soft = simulate(x0, SystemParams::with_stiffness(kStiffnessSoft), 80);

    // The single nominal trajectory is one draw from the impact-speed
    // distribution; the tabulated 12/26/40 mm bands hold for means over
    // sampled initial states (checked in the acceptance suite). Here: the
    // drop does impact, peaks at a plausible depth, and penetration shrinks
    // strictly with stiffness for the fixed x0.
    CHECK(hard.max_penetration > 0.002);
    CHECK(hard.max_penetration < 0.020);
    CHECK(soft.max_penetration > 0.010);
    CHECK(soft.max_penetration < 0.080);
    CHECK(hard.max_penetration < medium.max_penetration);
    CHECK(medium.max_penetration < soft.max_penetration);
}

TEST_CASE("simulate: diverged state raises") {
    SystemParams prm;
    State s;
    s.p = {0, 0, 1.0};
    s.pdot = {0, 0, -1e7};
    CHECK_THROWS_AS(simulate(s, prm, 80), DivergedError);
}

TEST_CASE("oracle_predict matches step and stored next velocities") {
    SystemParams prm;
    State x0;
    x0.p = {0.186, 0.026, 0.122};
    x0.q = normalized({-0.525, 0.394, -0.296, -0.678});
    x0.pdot = {0.014, 1.291, -0.212};
    x0.omega = {1.463, -4.854, 9.870};
    const Trajectory traj = simulate(x0, prm, 80);
    for (size_t t = 0; t + 1 < traj.states.size(); ++t) {
        const Vel6 pred = oracle_predict(traj.states[t], prm);
        const State& next = traj.states[t + 1];
        CHECK(pred.lin.x == next.pdot.x);
        CHECK(pred.lin.y == next.pdot.y);
        CHECK(pred.lin.z == next.pdot.z);
        CHECK(pred.ang.x == next.omega.x);
        CHECK(pred.ang.y == next.omega.y);
        CHECK(pred.ang.z == next.omega.z);
    }

    // At rest the oracle returns zero velocity.
    const State rest = resting_state(prm);
    const Vel6 pred = oracle_predict(rest, prm);
    CHECK(norm(pred.lin) < 1e-9);
    CHECK(norm(pred.ang) < 1e-9);
}
