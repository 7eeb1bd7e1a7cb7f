#include "stiffdyn/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>

#include "stiffdyn/parallel.hpp"

namespace stiffdyn {

void adam_step(AdamState& opt, std::vector<double>& theta, const std::vector<double>& grad,
               const TrainHyper& hyper) {
    if (opt.m.size() != theta.size()) {
        opt.m.assign(theta.size(), 0.0);
        opt.v.assign(theta.size(), 0.0);
        opt.step = 0;
    }
    ++opt.step;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(opt.step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i] + hyper.weight_decay * theta[i];
        opt.m[i] = hyper.beta1 * opt.m[i] + (1.0 - hyper.beta1) * g;
        opt.v[i] = hyper.beta2 * opt.v[i] + (1.0 - hyper.beta2) * g * g;
        const double m_hat = opt.m[i] / bc1;
        const double v_hat = opt.v[i] / bc2;
        theta[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
}

void compose_target(const SlicedDataset& ds, std::size_t example, TargetMode mode,
                    double* out6) {
    const double* t = ds.target(example);
    if (mode == TargetMode::VNext) {
        std::copy(t, t + 6, out6);
        return;
    }
    const double* last = ds.last_state(example);
    for (int i = 0; i < 6; ++i) {
        out6[i] = t[i] - last[7 + i];  // velocities start at index 7 of the state
    }
}

namespace {

void gather_batch(const SlicedDataset& ds, const std::vector<std::size_t>& idx,
                  std::size_t begin, std::size_t end, TargetMode mode,
                  std::vector<double>& x, std::vector<double>& t) {
    const std::size_t dim = ds.input_dim();
    const std::size_t n = end - begin;
    x.resize(n * dim);
    t.resize(n * 6);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ex = idx[begin + i];
        std::copy(ds.input(ex), ds.input(ex) + dim, x.begin() + i * dim);
        compose_target(ds, ex, mode, t.data() + i * 6);
    }
}

constexpr std::size_t kEvalChunk = 1024;

double split_loss_ws(const ModelParams& p, const SlicedDataset& ds,
                     const std::vector<std::size_t>& idx, Workspace& ws,
                     std::vector<double>& x, std::vector<double>& t) {
    if (idx.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t begin = 0; begin < idx.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(idx.size(), begin + kEvalChunk);
        gather_batch(ds, idx, begin, end, p.config.target, x, t);
        total += mse_loss(p, x.data(), t.data(), end - begin, ws) *
                 static_cast<double>(end - begin);
    }
    return total / static_cast<double>(idx.size());
}

}  // namespace

double split_loss(const ModelParams& p, const SlicedDataset& ds,
                  const std::vector<std::size_t>& idx) {
    Workspace ws;
    std::vector<double> x, t;
    return split_loss_ws(p, ds, idx, ws, x, t);
}

TrainResult train(const ModelConfig& cfg, const SlicedDataset& data, const TrainHyper& hyper) {
    if (data.train_idx.empty() || data.val_idx.empty()) {
        throw std::invalid_argument("train: dataset has empty train or val split");
    }
    Rng init_rng = Rng::stream(hyper.seed, 0xA11ULL);
    ModelParams params = init_params(cfg, init_rng);

    AdamState opt;
    Workspace ws;
    std::vector<double> grad, bx, bt;
    std::vector<std::size_t> order = data.train_idx;

    TrainResult result;
    result.best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        Rng shuffle_rng = Rng::stream(hyper.seed, 0xE80ULL, epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += hyper.batch_size) {
            const std::size_t end = std::min(order.size(), begin + hyper.batch_size);
            gather_batch(data, order, begin, end, cfg.target, bx, bt);
            const double loss =
                mse_and_gradient(params, bx.data(), bt.data(), end - begin, grad, ws);
            epoch_loss += loss * static_cast<double>(end - begin);
            seen += end - begin;
            adam_step(opt, params.theta, grad, hyper);
        }
        epoch_loss /= static_cast<double>(seen);

        const double val = split_loss_ws(params, data, data.val_idx, ws, bx, bt);
        if (!std::isfinite(epoch_loss) || !std::isfinite(val)) {
            throw DivergedError("train: non-finite loss at epoch " + std::to_string(epoch));
        }
        result.train_history.push_back(epoch_loss);
        result.val_history.push_back(val);
        ++result.epochs_run;

        if (val < best_val) {
            best_val = val;
            result.best = params;
            bad_epochs = 0;
        } else if (++bad_epochs >= hyper.patience) {
            break;
        }
    }

    result.final_train = split_loss_ws(result.best, data, data.train_idx, ws, bx, bt);
    result.final_val = split_loss_ws(result.best, data, data.val_idx, ws, bx, bt);
    result.final_test = split_loss_ws(result.best, data, data.test_idx, ws, bx, bt);
    return result;
}

SweepResult hyperparameter_sweep(const SweepSpace& space, const TrainHyper& base,
                                 const std::vector<Trajectory>& trajs,
                                 std::uint64_t dataset_seed, int jobs) {
    struct Point {
        ModelConfig cfg;
        TrainHyper hyper;
    };
    std::vector<Point> points;
    for (const Architecture arch : space.architectures) {
        const std::vector<int> histories =
            arch == Architecture::Mlp ? std::vector<int>{1} : space.histories;
        for (const TargetMode target : space.targets) {
            for (const double lr : space.learning_rates) {
                for (const int hidden : space.hidden_sizes) {
                    for (const int history : histories) {
                        for (const double decay : space.weight_decays) {
                            Point pt;
                            pt.cfg.architecture = arch;
                            pt.cfg.hidden_size = hidden;
                            pt.cfg.history = history;
                            pt.cfg.target = target;
                            pt.hyper = base;
                            pt.hyper.learning_rate = lr;
                            pt.hyper.weight_decay = decay;
                            points.push_back(pt);
                        }
                    }
                }
            }
        }
    }
    if (points.empty()) {
        throw std::invalid_argument("hyperparameter_sweep: empty space");
    }

    // One dataset per distinct history.
    std::map<int, SlicedDataset> datasets;
    for (const Point& pt : points) {
        if (!datasets.count(pt.cfg.history)) {
            datasets.emplace(pt.cfg.history, build_dataset(trajs, pt.cfg.history, dataset_seed));
        }
    }

    SweepResult result;
    result.entries.resize(points.size() * space.replicates);
    std::vector<std::function<void()>> tasks;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        for (int rep = 0; rep < space.replicates; ++rep) {
            tasks.push_back([&, pi, rep]() {
                const Point& pt = points[pi];
                SweepEntry entry;
                entry.architecture = pt.cfg.architecture;
                entry.target = pt.cfg.target;
                entry.learning_rate = pt.hyper.learning_rate;
                entry.hidden_size = pt.cfg.hidden_size;
                entry.history = pt.cfg.history;
                entry.weight_decay = pt.hyper.weight_decay;
                entry.replicate = rep;

                TrainHyper hyper = pt.hyper;
                hyper.seed = mix64(base.seed ^ mix64(pi * 1000003ULL + rep));
                const SlicedDataset& ds = datasets.at(pt.cfg.history);
                for (int attempt = 0; attempt < 2; ++attempt) {
                    try {
                        const TrainResult tr = train(pt.cfg, ds, hyper);
                        entry.seed = hyper.seed;
                        entry.train_loss = tr.final_train;
                        entry.val_loss = tr.final_val;
                        entry.test_loss = tr.final_test;
                        entry.epochs = tr.epochs_run;
                        entry.diverged = false;
                        break;
                    } catch (const DivergedError&) {
                        entry.diverged = true;
                        entry.retried = attempt == 0;
                        entry.seed = hyper.seed;
                        hyper.seed += 1;
                    }
                }
                result.entries[pi * space.replicates + rep] = entry;
            });
        }
    }
    run_parallel(tasks, jobs);

    double best_mean = std::numeric_limits<double>::infinity();
    std::size_t best_pi = 0;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        double sum = 0.0;
        int n = 0;
        for (int rep = 0; rep < space.replicates; ++rep) {
            const SweepEntry& e = result.entries[pi * space.replicates + rep];
            if (!e.diverged) {
                sum += e.test_loss;
                ++n;
            }
        }
        if (n == 0) {
            continue;
        }
        const double mean = sum / n;
        if (mean < best_mean) {
            best_mean = mean;
            best_pi = pi;
        }
    }
    result.best_config = points[best_pi].cfg;
    result.best_hyper = points[best_pi].hyper;
    result.best_mean_test = best_mean;
    return result;
}

}  // namespace stiffdyn
