#pragma once

// Optimization loop: Adam with coupled weight decay, epoch-level early
// stopping on validation loss, and the hyperparameter grid sweep.

#include <cstdint>
#include <optional>
#include <vector>

#include "stiffdyn/dataset.hpp"
#include "stiffdyn/nn.hpp"

namespace stiffdyn {

struct TrainHyper {
    double learning_rate = 1e-4;
    double weight_decay = 0.0;
    std::size_t batch_size = 256;
    int max_epochs = 2000;
    int patience = 30;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

// Bias-corrected Adam update; weight decay enters as an additive
// lambda * theta gradient term before the moment updates.
void adam_step(AdamState& opt, std::vector<double>& theta, const std::vector<double>& grad,
               const TrainHyper& hyper);

// Regression target for one example under the model's target mode: the raw
// next velocity, or its difference from the last window state's velocity.
void compose_target(const SlicedDataset& ds, std::size_t example, TargetMode mode,
                    double* out6);

// Mean over the index set of the squared residual 2-norm (the training loss).
double split_loss(const ModelParams& p, const SlicedDataset& ds,
                  const std::vector<std::size_t>& idx);

struct TrainResult {
    ModelParams best;
    std::vector<double> train_history;
    std::vector<double> val_history;
    double final_train = 0.0;
    double final_val = 0.0;
    double final_test = 0.0;
    int epochs_run = 0;
};

// Full training run: seeded init, shuffled epochs, early stopping with
// `patience`, returns the parameters with the lowest validation loss and
// their split losses. Throws DivergedError on non-finite loss.
TrainResult train(const ModelConfig& cfg, const SlicedDataset& data, const TrainHyper& hyper);

struct SweepSpace {
    std::vector<Architecture> architectures = {Architecture::Gru};
    std::vector<TargetMode> targets = {TargetMode::VNext, TargetMode::DeltaV};
    std::vector<double> learning_rates = {1e-3, 1e-4, 1e-5};
    std::vector<int> hidden_sizes = {128, 256, 512};
    std::vector<int> histories = {4, 8, 16};
    std::vector<double> weight_decays = {0.0, 4e-5, 4e-3};
    int replicates = 10;
};

struct SweepEntry {
    Architecture architecture;
    TargetMode target;
    double learning_rate;
    int hidden_size;
    int history;
    double weight_decay;
    int replicate;
    std::uint64_t seed;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double test_loss = 0.0;
    int epochs = 0;
    bool diverged = false;
    bool retried = false;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    // Index into `entries` of one replicate of the winning setting; the
    // winner has the lowest mean test loss over its non-diverged replicates.
    ModelConfig best_config;
    TrainHyper best_hyper;
    double best_mean_test = 0.0;
};

// Cartesian grid over the space; R replicate runs per setting with distinct
// seeds; one deterministic seed+1 retry per diverged run. MLP settings pin
// history to 1. Datasets are rebuilt per history from `trajs`.
SweepResult hyperparameter_sweep(const SweepSpace& space, const TrainHyper& base,
                                 const std::vector<Trajectory>& trajs,
                                 std::uint64_t dataset_seed, int jobs);

}  // namespace stiffdyn
