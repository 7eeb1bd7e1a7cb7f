#include "stiffdyn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "stiffdyn/text_io.hpp"

namespace stiffdyn {

namespace {

constexpr const char* kTrajSchema = "stiffdyn-traj-v1";

Vec3 symmetric_vec(Rng& rng, double bound) {
    return {rng.symmetric(bound), rng.symmetric(bound), rng.symmetric(bound)};
}

// Uniform axis from the cube [-1,1]^3, normalized; near-zero draws rejected.
Vec3 random_axis(Rng& rng) {
    for (;;) {
        const Vec3 v = symmetric_vec(rng, 1.0);
        const double n = norm(v);
        if (n > 1e-3) {
            return v / n;
        }
    }
}

Quat random_rotation(Rng& rng, double max_angle) {
    const Vec3 axis = random_axis(rng);
    const double theta = rng.symmetric(max_angle);
    return quat_exp(axis * theta);
}

}  // namespace

State sample_initial_state(const DataGenConfig& cfg, Rng& rng) {
    State s;
    s.p = cfg.x0_ref.p + symmetric_vec(rng, cfg.dp0);
    s.q = normalized(quat_mul(normalized(cfg.x0_ref.q), random_rotation(rng, cfg.dq0_angle)));
    s.pdot = cfg.x0_ref.pdot + symmetric_vec(rng, cfg.dpdot0);
    s.omega = cfg.x0_ref.omega + symmetric_vec(rng, cfg.domega0);
    return s;
}

std::vector<PoseSample> add_trajectory_noise(const Trajectory& traj,
                                             const DataGenConfig& cfg, Rng& rng) {
    const Vec3 drift_p = symmetric_vec(rng, cfg.drift_pos);
    const Quat drift_q = random_rotation(rng, cfg.drift_angle);

    std::vector<PoseSample> poses;
    poses.reserve(traj.states.size());
    for (const State& s : traj.states) {
        PoseSample pose;
        pose.p = s.p + drift_p + symmetric_vec(rng, cfg.jitter_pos);
        pose.q = normalized(quat_mul(quat_mul(s.q, drift_q),
                                     random_rotation(rng, cfg.jitter_angle)));
        poses.push_back(pose);
    }
    return poses;
}

std::vector<State> reconstruct_velocities(const std::vector<PoseSample>& poses, double dt) {
    if (poses.size() < 2) {
        throw std::invalid_argument("reconstruct_velocities: need at least 2 poses");
    }
    std::vector<State> states(poses.size());
    for (std::size_t t = 0; t < poses.size(); ++t) {
        states[t].p = poses[t].p;
        states[t].q = poses[t].q;
        if (t > 0) {
            states[t].pdot = (poses[t].p - poses[t - 1].p) / dt;
            states[t].omega =
                quat_log(quat_mul(poses[t - 1].q.conjugate(), poses[t].q)) / dt;
        }
    }
    states[0].pdot = states[1].pdot;
    states[0].omega = states[1].omega;
    return states;
}

Trajectory generate_noisy_trajectory(const DataGenConfig& cfg, const SystemParams& prm,
                                     std::uint64_t index) {
    // Substream 0 drives the initial state and substream 1 the noise, both
    // independent of the stiffness so datasets are matched across settings.
    Rng rng_x0 = Rng::stream(cfg.seed, index, 0);
    Rng rng_noise = Rng::stream(cfg.seed, index, 1);

    const State x0 = sample_initial_state(cfg, rng_x0);
    const Trajectory clean = simulate(x0, prm, cfg.traj_len, cfg.seed);
    const auto poses = add_trajectory_noise(clean, cfg, rng_noise);

    Trajectory noisy;
    noisy.states = reconstruct_velocities(poses, prm.dt);
    noisy.params = prm;
    noisy.seed = cfg.seed;
    noisy.max_penetration = clean.max_penetration;
    return noisy;
}

SlicedDataset build_dataset(const std::vector<Trajectory>& trajs, int history,
                            std::uint64_t seed) {
    if (history < 1) {
        throw std::invalid_argument("build_dataset: history must be >= 1");
    }
    const std::size_t dim = 13 * static_cast<std::size_t>(history);

    SlicedDataset ds;
    ds.history = history;

    for (const Trajectory& traj : trajs) {
        const auto& st = traj.states;
        if (st.size() < static_cast<std::size_t>(history) + 1) {
            throw std::invalid_argument("build_dataset: trajectory shorter than history+1");
        }
        for (std::size_t t = history - 1; t + 1 < st.size(); ++t) {
            for (int j = 0; j < history; ++j) {
                const auto a = st[t - history + 1 + j].to_array();
                ds.inputs.insert(ds.inputs.end(), a.begin(), a.end());
            }
            const auto last = st[t].to_array();
            ds.last_states.insert(ds.last_states.end(), last.begin(), last.end());
            const State& next = st[t + 1];
            ds.targets.insert(ds.targets.end(),
                              {next.pdot.x, next.pdot.y, next.pdot.z,
                               next.omega.x, next.omega.y, next.omega.z});
        }
    }

    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = Rng::stream(seed, 0x51edULL);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }

    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.7 * n));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(0.2 * n));
    ds.train_idx.assign(order.begin(), order.begin() + n_train);
    ds.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    ds.test_idx.assign(order.begin() + n_train + n_val, order.end());

    // Normalization statistics from the training split only.
    ds.mean.assign(dim, 0.0);
    ds.stddev.assign(dim, 0.0);
    for (std::size_t i : ds.train_idx) {
        const double* row = ds.inputs.data() + i * dim;
        for (std::size_t c = 0; c < dim; ++c) ds.mean[c] += row[c];
    }
    for (std::size_t c = 0; c < dim; ++c) ds.mean[c] /= static_cast<double>(n_train);
    for (std::size_t i : ds.train_idx) {
        const double* row = ds.inputs.data() + i * dim;
        for (std::size_t c = 0; c < dim; ++c) {
            const double d = row[c] - ds.mean[c];
            ds.stddev[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        ds.stddev[c] = std::sqrt(ds.stddev[c] / static_cast<double>(n_train));
        if (ds.stddev[c] < 1e-12) {
            ds.stddev[c] = 1.0;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double* row = ds.inputs.data() + i * dim;
        for (std::size_t c = 0; c < dim; ++c) {
            row[c] = (row[c] - ds.mean[c]) / ds.stddev[c];
        }
    }
    return ds;
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_trajectory: cannot open " + path.string());
    }
    out << "# schema=" << kTrajSchema << "\n";
    out << "# k=" << fmt_double(traj.params.k) << "\n";
    out << "# zeta=" << fmt_double(traj.params.zeta) << "\n";
    out << "# dt=" << fmt_double(traj.params.dt) << "\n";
    out << "# seed=" << traj.seed << "\n";
    out << "# max_penetration=" << fmt_double(traj.max_penetration) << "\n";
    for (const State& s : traj.states) {
        const auto a = s.to_array();
        for (int i = 0; i < 13; ++i) {
            out << (i ? " " : "") << fmt_double(a[i]);
        }
        out << "\n";
    }
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_trajectory: cannot open " + path.string());
    }
    Trajectory traj;
    std::map<std::string, std::string> header;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw SchemaError("load_trajectory: malformed header line: " + line);
            }
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            header[key] = line.substr(eq + 1);
            continue;
        }
        std::istringstream row(line);
        std::array<double, 13> a;
        for (int i = 0; i < 13; ++i) {
            if (!(row >> a[i])) {
                throw SchemaError("load_trajectory: malformed state row in " + path.string());
            }
        }
        double extra;
        if (row >> extra) {
            throw SchemaError("load_trajectory: too many values in row of " + path.string());
        }
        traj.states.push_back(State::from_array(a));
    }
    if (header["schema"] != kTrajSchema) {
        throw SchemaError("load_trajectory: schema mismatch in " + path.string() +
                          " (got '" + header["schema"] + "')");
    }
    if (traj.states.size() < 2) {
        throw SchemaError("load_trajectory: truncated file " + path.string());
    }
    try {
        traj.params = SystemParams::with_stiffness(std::stod(header.at("k")));
        traj.params.zeta = std::stod(header.at("zeta"));
        traj.params.dt = std::stod(header.at("dt"));
        traj.seed = std::stoull(header.at("seed"));
        traj.max_penetration = std::stod(header.at("max_penetration"));
    } catch (const std::out_of_range&) {
        throw SchemaError("load_trajectory: missing header key in " + path.string());
    }
    return traj;
}

void save_trajectories(const std::vector<Trajectory>& trajs,
                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        std::snprintf(name, sizeof(name), "traj_%05zu.txt", i);
        save_trajectory(trajs[i], dir / name);
    }
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("traj_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Trajectory> trajs;
    trajs.reserve(files.size());
    for (const auto& f : files) {
        trajs.push_back(load_trajectory(f));
    }
    return trajs;
}

}  // namespace stiffdyn
