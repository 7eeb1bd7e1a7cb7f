#pragma once

// Data pipeline: initial-state sampling around the nominal drop state, sensor
// noise injection (constant drift + per-sample jitter on configurations),
// finite-difference velocity reconstruction, window slicing, normalization,
// splitting, and trajectory-file persistence.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "stiffdyn/cube_sim.hpp"
#include "stiffdyn/rng.hpp"

namespace stiffdyn {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataGenConfig {
    State x0_ref = {{0.186, 0.026, 0.122},
                    {-0.525, 0.394, -0.296, -0.678},  // normalized on use
                    {0.014, 1.291, -0.212},
                    {1.463, -4.854, 9.870}};
    // Initial-state perturbation bounds (per axis / rotation angle).
    double dp0 = 0.1;          // m
    double dq0_angle = 1.0;    // rad
    double dpdot0 = 0.1;       // m/s
    double domega0 = 0.1;      // rad/s
    // Constant-in-time drift noise on configurations.
    double drift_pos = 1e-3;               // m
    double drift_angle = M_PI / 180.0;     // rad (1 deg)
    // Per-sample noise on configurations.
    double jitter_pos = 1e-5;                      // m
    double jitter_angle = 0.01 * M_PI / 180.0;     // rad (0.01 deg)
    int n_train_pool = 10000;
    int n_eval = 1000;
    std::uint64_t seed = 0;
    int traj_len = 80;
};

// Noisy poses are intermediate between simulation and reconstruction.
struct PoseSample {
    Vec3 p;
    Quat q;
};

State sample_initial_state(const DataGenConfig& cfg, Rng& rng);

// One drift offset for the whole trajectory, then independent per-sample
// offsets; quaternion offsets right-multiplied and renormalized.
std::vector<PoseSample> add_trajectory_noise(const Trajectory& traj,
                                             const DataGenConfig& cfg, Rng& rng);

// Invert the configuration updates: pdot_t = (p_t - p_{t-1})/dt,
// omega_t = log(q_{t-1}^-1 q_t)/dt. The first state copies the second's
// velocities.
std::vector<State> reconstruct_velocities(const std::vector<PoseSample>& poses, double dt);

// Simulate + noise + reconstruct, with the per-trajectory RNG stream derived
// from (cfg.seed, index). Returned Trajectory holds the noisy states and the
// clean simulation's max penetration.
Trajectory generate_noisy_trajectory(const DataGenConfig& cfg, const SystemParams& prm,
                                     std::uint64_t index);

struct SlicedDataset {
    int history = 1;
    // Row-major: n x (13*history) normalized inputs, n x 6 raw targets.
    std::vector<double> inputs;
    std::vector<double> targets;
    // Raw (unnormalized) last window state per example, for the oracle
    // baseline and delta-v target reconstruction.
    std::vector<double> last_states;  // n x 13
    std::vector<double> mean;         // 13*history
    std::vector<double> stddev;       // 13*history
    std::vector<std::size_t> train_idx, val_idx, test_idx;

    std::size_t size() const { return targets.size() / 6; }
    std::size_t input_dim() const { return mean.size(); }
    const double* input(std::size_t i) const { return inputs.data() + i * input_dim(); }
    const double* target(std::size_t i) const { return targets.data() + i * 6; }
    const double* last_state(std::size_t i) const { return last_states.data() + i * 13; }
};

// Slice trajectories into (history-window -> next velocity) examples, shuffle
// windows with `seed`, split 70:20:10, and normalize inputs with statistics
// of the training split only.
SlicedDataset build_dataset(const std::vector<Trajectory>& trajs, int history,
                            std::uint64_t seed);

// Line-oriented trajectory file: `# key=value` header lines, then one row of
// 13 space-separated values per state. Round-trips byte-identically.
void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

void save_trajectories(const std::vector<Trajectory>& trajs,
                       const std::filesystem::path& dir);
// Loads every traj_*.txt under dir, sorted by filename.
std::vector<Trajectory> load_trajectories(const std::filesystem::path& dir);

}  // namespace stiffdyn
