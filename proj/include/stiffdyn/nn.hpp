#pragma once

// From-scratch predictors mapping a normalized state window to the next
// velocity: an MLP (history 1) and a GRU with an MLP decoder (history > 1).
// Forward passes are batched on the kernels backend; gradients are exact
// analytic backpropagation (through time for the GRU) of the batch MSE.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stiffdyn/rng.hpp"

namespace stiffdyn {

enum class Architecture { Mlp, Gru };
enum class TargetMode { VNext, DeltaV };

const char* to_string(Architecture a);
const char* to_string(TargetMode t);
Architecture architecture_from_string(const std::string& s);
TargetMode target_mode_from_string(const std::string& s);

struct ModelConfig {
    Architecture architecture = Architecture::Gru;
    int hidden_size = 128;
    int history = 16;  // 1 for MLP
    TargetMode target = TargetMode::VNext;
    int input_dim = 13;   // per window step
    int output_dim = 6;
    int mlp_hidden_layers = 4;

    int window_dim() const { return input_dim * history; }
    int decoder_hidden() const { return hidden_size / 2; }
};

struct ModelParams {
    ModelConfig config;
    std::vector<double> theta;
};

// Named view into the flat parameter vector; rows x cols, cols = 1 for biases.
struct ParamView {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

std::vector<ParamView> param_layout(const ModelConfig& cfg);
std::size_t param_count(const ModelConfig& cfg);

// Glorot-uniform weights (±sqrt(6/(fan_in+fan_out))), zero biases.
ModelParams init_params(const ModelConfig& cfg, Rng& rng);

// Reusable scratch for batched forward/backward.
struct Workspace {
    std::vector<std::vector<double>> bufs;
    std::vector<double>& buf(std::size_t slot, std::size_t size);
};

// x: batch x window_dim row-major (normalized), y: batch x output_dim.
void forward(const ModelParams& p, const double* x, std::size_t batch, double* y,
             Workspace& ws);

// Batch MSE per the training loss (mean over the batch of the squared 2-norm
// of the 6-dim residual) and its exact gradient; grad is resized and
// overwritten. Returns the loss.
double mse_and_gradient(const ModelParams& p, const double* x, const double* targets,
                        std::size_t batch, std::vector<double>& grad, Workspace& ws);

// Loss only, without gradient work.
double mse_loss(const ModelParams& p, const double* x, const double* targets,
                std::size_t batch, Workspace& ws);

// Versioned checkpoint: config + normalization statistics + metadata + flat
// parameters. Round-trips exactly.
struct Checkpoint {
    ModelParams params;
    std::vector<double> norm_mean;
    std::vector<double> norm_std;
    std::map<std::string, std::string> metadata;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stiffdyn
