#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stiffdyn/dataset.hpp"

using namespace stiffdyn;
namespace fs = std::filesystem;

namespace {

Trajectory make_clean_trajectory(std::uint64_t index = 3) {
    DataGenConfig cfg;
    cfg.seed = 9;
    Rng rng = Rng::stream(cfg.seed, index, 0);
    const State x0 = sample_initial_state(cfg, rng);
    return simulate(x0, SystemParams::with_stiffness(kStiffnessHard), 80);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("stiffdyn_test_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("sample_initial_state: zero bounds give the normalized reference") {
    DataGenConfig cfg;
    cfg.dp0 = cfg.dq0_angle = cfg.dpdot0 = cfg.domega0 = 0.0;
    Rng rng(1);
    const State s = sample_initial_state(cfg, rng);
    CHECK(s.p.x == doctest::Approx(0.186));
    CHECK(std::abs(norm(s.q) - 1.0) < 1e-12);
    CHECK(quat_angle_deg(s.q, normalized({-0.525, 0.394, -0.296, -0.678})) < 1e-9);
    CHECK(s.omega.z == doctest::Approx(9.870));
}

TEST_CASE("sample_initial_state: default bounds keep p_z in [0.022, 0.222]") {
    DataGenConfig cfg;
    Rng rng(2);
    Vec3 mean_dp;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const State s = sample_initial_state(cfg, rng);
        CHECK(s.p.z >= 0.022);
        CHECK(s.p.z <= 0.222);
        CHECK(std::abs(norm(s.q) - 1.0) < 1e-9);
        mean_dp += s.p - cfg.x0_ref.p;
    }
    mean_dp *= 1.0 / n;
    CHECK(std::abs(mean_dp.x) < 0.01);
    CHECK(std::abs(mean_dp.y) < 0.01);
    CHECK(std::abs(mean_dp.z) < 0.01);
}

TEST_CASE("add_trajectory_noise: zero config is identity, drift is constant") {
    const Trajectory traj = make_clean_trajectory();

    DataGenConfig zero;
    zero.drift_pos = zero.drift_angle = zero.jitter_pos = zero.jitter_angle = 0.0;
    Rng rng(3);
    const auto poses = add_trajectory_noise(traj, zero, rng);
    for (std::size_t t = 0; t < poses.size(); ++t) {
        CHECK(norm(poses[t].p - traj.states[t].p) == 0.0);
        CHECK(quat_angle_deg(poses[t].q, traj.states[t].q) < 1e-9);
    }

    DataGenConfig drift_only;
    drift_only.jitter_pos = 0.0;
    drift_only.jitter_angle = 0.0;
    Rng rng2(4);
    const auto drifted = add_trajectory_noise(traj, drift_only, rng2);
    const Vec3 offset0 = drifted[0].p - traj.states[0].p;
    for (std::size_t t = 0; t < drifted.size(); ++t) {
        CHECK(norm((drifted[t].p - traj.states[t].p) - offset0) < 1e-15);
    }
}

TEST_CASE("add_trajectory_noise: default magnitudes stay near 1 mm / 1 deg") {
    const Trajectory traj = make_clean_trajectory();
    DataGenConfig cfg;
    Rng rng(5);
    const auto poses = add_trajectory_noise(traj, cfg, rng);
    for (std::size_t t = 0; t < poses.size(); ++t) {
        const Vec3 err = poses[t].p - traj.states[t].p;
        CHECK(std::abs(err.x) <= 1.01e-3);
        CHECK(std::abs(err.y) <= 1.01e-3);
        CHECK(std::abs(err.z) <= 1.01e-3);
        CHECK(quat_angle_deg(poses[t].q, traj.states[t].q) <= 1.01);
    }
}

TEST_CASE("reconstruct_velocities: constant poses give zero velocity") {
    std::vector<PoseSample> poses(10, PoseSample{{1, 2, 3}, {1, 0, 0, 0}});
    const auto states = reconstruct_velocities(poses, 6.74e-3);
    for (const State& s : states) {
        CHECK(norm(s.pdot) == 0.0);
        CHECK(norm(s.omega) == 0.0);
    }
}

TEST_CASE("reconstruct_velocities inverts the simulator exactly") {
    const Trajectory traj = make_clean_trajectory();
    std::vector<PoseSample> poses;
    for (const State& s : traj.states) poses.push_back({s.p, s.q});
    const auto rec = reconstruct_velocities(poses, traj.params.dt);
    for (std::size_t t = 1; t < rec.size(); ++t) {
        CHECK(norm(rec[t].pdot - traj.states[t].pdot) < 1e-10);
        CHECK(norm(rec[t].omega - traj.states[t].omega) < 1e-10);
    }
    CHECK(norm(rec[0].pdot - rec[1].pdot) == 0.0);
}

TEST_CASE("reconstruct_velocities: noise amplification is bounded by 2*eps/dt") {
    const Trajectory traj = make_clean_trajectory();
    const double eps = 1e-3;
    DataGenConfig cfg;
    cfg.drift_pos = 0.0;
    cfg.drift_angle = 0.0;
    cfg.jitter_pos = eps;
    cfg.jitter_angle = 0.0;
    Rng rng(6);
    const auto poses = add_trajectory_noise(traj, cfg, rng);
    const auto rec = reconstruct_velocities(poses, traj.params.dt);
    const double bound = 2.0 * eps * std::sqrt(3.0) / traj.params.dt + 1e-9;
    double worst = 0.0;
    for (std::size_t t = 1; t < rec.size(); ++t) {
        worst = std::max(worst, norm(rec[t].pdot - traj.states[t].pdot));
    }
    CHECK(worst <= bound);
    // Amplification is real: well above the raw position noise.
    CHECK(worst > eps * 10.0);
}

TEST_CASE("build_dataset: window counts, split sizes, normalization") {
    DataGenConfig cfg;
    cfg.seed = 11;
    const SystemParams prm = SystemParams::with_stiffness(kStiffnessMedium);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 10; ++i) {
        trajs.push_back(generate_noisy_trajectory(cfg, prm, i));
    }

    const SlicedDataset one = build_dataset({trajs[0]}, 16, 1);
    CHECK(one.size() == 64);

    const SlicedDataset ds = build_dataset(trajs, 16, 1);
    CHECK(ds.size() == 640);
    CHECK(ds.train_idx.size() == 448);
    CHECK(ds.val_idx.size() == 128);
    CHECK(ds.test_idx.size() == 64);
    CHECK(ds.input_dim() == 16 * 13);

    // Normalized training inputs: per-dimension mean ~0, std ~1.
    for (std::size_t c = 0; c < ds.input_dim(); ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i : ds.train_idx) mean += ds.input(i)[c];
        mean /= static_cast<double>(ds.train_idx.size());
        for (std::size_t i : ds.train_idx) {
            const double d = ds.input(i)[c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(ds.train_idx.size());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
    }

    // Raw targets: the last window state's velocities are reachable and the
    // target equals the next state's velocity for some example; verify the
    // slicing alignment on trajectory 0, window at t = 15 (first window).
    const SlicedDataset unshuffled = build_dataset({trajs[0]}, 16, 1);
    const State& next = trajs[0].states[16];
    bool found = false;
    for (std::size_t i = 0; i < unshuffled.size(); ++i) {
        if (unshuffled.target(i)[0] == next.pdot.x &&
            unshuffled.target(i)[5] == next.omega.z) {
            found = true;
        }
    }
    CHECK(found);

    CHECK_THROWS_AS(build_dataset(trajs, 81, 1), std::invalid_argument);
}

TEST_CASE("build_dataset: split proportions across sizes") {
    DataGenConfig cfg;
    cfg.seed = 12;
    const SystemParams prm = SystemParams::with_stiffness(kStiffnessSoft);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 8; ++i) trajs.push_back(generate_noisy_trajectory(cfg, prm, i));
    for (int h : {1, 4, 16}) {
        const SlicedDataset ds = build_dataset(trajs, h, 3);
        const auto n = static_cast<double>(ds.size());
        CHECK(std::abs(ds.train_idx.size() - 0.7 * n) <= 1.0);
        CHECK(std::abs(ds.val_idx.size() - 0.2 * n) <= 1.0);
        CHECK(ds.train_idx.size() + ds.val_idx.size() + ds.test_idx.size() == ds.size());
    }
}

TEST_CASE("trajectory files: byte-identical round-trip and determinism") {
    TempDir tmp;
    DataGenConfig cfg;
    cfg.seed = 21;
    const SystemParams prm = SystemParams::with_stiffness(kStiffnessHard);
    const Trajectory traj = generate_noisy_trajectory(cfg, prm, 5);

    const fs::path p1 = tmp.path / "a.txt";
    const fs::path p2 = tmp.path / "b.txt";
    save_trajectory(traj, p1);
    const Trajectory loaded = load_trajectory(p1);
    save_trajectory(loaded, p2);
    CHECK(read_file(p1) == read_file(p2));
    REQUIRE(loaded.states.size() == traj.states.size());
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        const auto a = traj.states[t].to_array();
        const auto b = loaded.states[t].to_array();
        for (int i = 0; i < 13; ++i) CHECK(a[i] == b[i]);
    }
    CHECK(loaded.params.k == traj.params.k);
    CHECK(loaded.max_penetration == traj.max_penetration);

    // Re-generating with the same seed is bit-identical.
    const Trajectory again = generate_noisy_trajectory(cfg, prm, 5);
    const fs::path p3 = tmp.path / "c.txt";
    save_trajectory(again, p3);
    CHECK(read_file(p1) == read_file(p3));
}

TEST_CASE("trajectory files: schema and malformed-file errors") {
    TempDir tmp;
    const fs::path good = tmp.path / "good.txt";
    save_trajectory(make_clean_trajectory(), good);

    const fs::path bad_schema = tmp.path / "bad_schema.txt";
    {
        std::string contents = read_file(good);
        const auto pos = contents.find("stiffdyn-traj-v1");
        contents.replace(pos, 16, "stiffdyn-traj-v9");
        std::ofstream(bad_schema) << contents;
    }
    CHECK_THROWS_AS(load_trajectory(bad_schema), SchemaError);

    const fs::path truncated = tmp.path / "truncated.txt";
    {
        std::string contents = read_file(good);
        std::ofstream(truncated) << contents.substr(0, contents.size() * 2 / 3 + 7);
    }
    CHECK_THROWS_AS(load_trajectory(truncated), SchemaError);

    CHECK_THROWS(load_trajectory(tmp.path / "missing.txt"));
}

TEST_CASE("save/load trajectory directories") {
    TempDir tmp;
    DataGenConfig cfg;
    cfg.seed = 33;
    const SystemParams prm = SystemParams::with_stiffness(kStiffnessMedium);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 4; ++i) trajs.push_back(generate_noisy_trajectory(cfg, prm, i));
    save_trajectories(trajs, tmp.path / "set");
    const auto loaded = load_trajectories(tmp.path / "set");
    REQUIRE(loaded.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(loaded[i].states[7].p.x == trajs[i].states[7].p.x);
    }
}
