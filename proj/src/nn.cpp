#include "stiffdyn/nn.hpp"

#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stiffdyn/kernels.hpp"
#include "stiffdyn/text_io.hpp"

namespace stiffdyn {

const char* to_string(Architecture a) {
    return a == Architecture::Mlp ? "mlp" : "gru";
}

const char* to_string(TargetMode t) {
    return t == TargetMode::VNext ? "v_next" : "delta_v";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "mlp") return Architecture::Mlp;
    if (s == "gru") return Architecture::Gru;
    throw std::invalid_argument("unknown architecture: " + s);
}

TargetMode target_mode_from_string(const std::string& s) {
    if (s == "v_next") return TargetMode::VNext;
    if (s == "delta_v") return TargetMode::DeltaV;
    throw std::invalid_argument("unknown target mode: " + s);
}

std::vector<ParamView> param_layout(const ModelConfig& cfg) {
    std::vector<ParamView> layout;
    std::size_t cursor = 0;
    const auto add = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        layout.push_back({name, cursor, rows, cols});
        cursor += rows * cols;
    };
    const std::size_t hid = cfg.hidden_size;
    if (cfg.architecture == Architecture::Mlp) {
        std::size_t in = cfg.window_dim();
        for (int i = 0; i < cfg.mlp_hidden_layers; ++i) {
            add("w" + std::to_string(i), hid, in);
            add("b" + std::to_string(i), hid, 1);
            in = hid;
        }
        add("w_out", cfg.output_dim, in);
        add("b_out", cfg.output_dim, 1);
    } else {
        const std::size_t in = cfg.input_dim;
        for (const char* gate : {"z", "r", "n"}) {
            add(std::string("w") + gate, hid, in);
        }
        for (const char* gate : {"z", "r", "n"}) {
            add(std::string("u") + gate, hid, hid);
        }
        for (const char* gate : {"z", "r", "n"}) {
            add(std::string("b") + gate, hid, 1);
        }
        const std::size_t dh = cfg.decoder_hidden();
        add("dec_w1", dh, hid);
        add("dec_b1", dh, 1);
        add("dec_w2", cfg.output_dim, dh);
        add("dec_b2", cfg.output_dim, 1);
    }
    return layout;
}

std::size_t param_count(const ModelConfig& cfg) {
    const auto layout = param_layout(cfg);
    const auto& last = layout.back();
    return last.offset + last.rows * last.cols;
}

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
    ModelParams p;
    p.config = cfg;
    p.theta.assign(param_count(cfg), 0.0);
    for (const ParamView& view : param_layout(cfg)) {
        if (view.cols == 1) {
            continue;  // biases stay zero
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(view.rows + view.cols));
        for (std::size_t i = 0; i < view.rows * view.cols; ++i) {
            p.theta[view.offset + i] = rng.symmetric(bound);
        }
    }
    return p;
}

std::vector<double>& Workspace::buf(std::size_t slot, std::size_t size) {
    if (bufs.size() <= slot) {
        bufs.resize(slot + 1);
    }
    if (bufs[slot].size() < size) {
        bufs[slot].resize(size);
    }
    return bufs[slot];
}

namespace {

using kernels::active_kernels;

struct View {
    const double* w = nullptr;
    std::size_t rows = 0, cols = 0;
};

struct MutView {
    double* w = nullptr;
    std::size_t rows = 0, cols = 0;
};

// Offset table resolved once per call; index by layout order.
struct Resolved {
    std::vector<ParamView> layout;
    const double* theta;

    View get(const std::string& name) const {
        for (const auto& v : layout) {
            if (v.name == name) {
                return {theta + v.offset, v.rows, v.cols};
            }
        }
        throw std::logic_error("unknown param " + name);
    }
    MutView get_mut(const std::string& name, double* grad) const {
        for (const auto& v : layout) {
            if (v.name == name) {
                return {grad + v.offset, v.rows, v.cols};
            }
        }
        throw std::logic_error("unknown param " + name);
    }
};

void add_bias(double* mat, std::size_t batch, std::size_t n, const double* bias) {
    for (std::size_t i = 0; i < batch; ++i) {
        double* row = mat + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] += bias[j];
        }
    }
}

void colsum_acc(const double* mat, std::size_t batch, std::size_t n, double* out) {
    for (std::size_t i = 0; i < batch; ++i) {
        const double* row = mat + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += row[j];
        }
    }
}

void relu_inplace(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = v[i] > 0.0 ? v[i] : 0.0;
    }
}

void sigmoid_inplace(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = 1.0 / (1.0 + std::exp(-v[i]));
    }
}

void tanh_inplace(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::tanh(v[i]);
    }
}

// Workspace slot map. Backward scratch first, then per-step activations.
enum Slot : std::size_t {
    kDH = 0,
    kDH2,
    kDGateA,
    kDGateB,
    kDHr,
    kDDec,
    kDY,
    kDecHidden,
    kYScratch,
    kStepBase,  // XT(t), H(t), Z(t), R(t), N(t), HR(t) blocks follow
};

std::size_t slot_xt(int t) { return kStepBase + t; }
std::size_t slot_h(int h, int t) { return kStepBase + h + t; }          // t in [0, h]
std::size_t slot_z(int h, int t) { return kStepBase + 2 * h + 1 + t; }
std::size_t slot_r(int h, int t) { return kStepBase + 3 * h + 1 + t; }
std::size_t slot_n(int h, int t) { return kStepBase + 4 * h + 1 + t; }
std::size_t slot_hr(int h, int t) { return kStepBase + 5 * h + 1 + t; }

// MLP activations reuse the step block.
std::size_t slot_act(int i) { return kStepBase + i; }

// The outer slot vector must never grow once references into it are taken:
// buffers move on growth and raw data pointers survive, but references to the
// inner vectors do not.
void reserve_slots(Workspace& ws, std::size_t max_slot) {
    ws.buf(max_slot, 1);
}

void forward_mlp(const Resolved& rp, const ModelConfig& cfg, const double* x,
                 std::size_t batch, double* y, Workspace& ws) {
    const auto& k = active_kernels();
    const int n_hidden = cfg.mlp_hidden_layers;
    reserve_slots(ws, slot_act(n_hidden));
    const double* cur = x;
    std::size_t cur_dim = cfg.window_dim();
    for (int i = 0; i < n_hidden; ++i) {
        const View w = rp.get("w" + std::to_string(i));
        const View b = rp.get("b" + std::to_string(i));
        auto& act = ws.buf(slot_act(i), batch * w.rows);
        k.gemm_nt(batch, w.rows, cur_dim, cur, w.w, act.data(), false);
        add_bias(act.data(), batch, w.rows, b.w);
        relu_inplace(act.data(), batch * w.rows);
        cur = act.data();
        cur_dim = w.rows;
    }
    const View w = rp.get("w_out");
    const View b = rp.get("b_out");
    k.gemm_nt(batch, w.rows, cur_dim, cur, w.w, y, false);
    add_bias(y, batch, w.rows, b.w);
}

void forward_gru(const Resolved& rp, const ModelConfig& cfg, const double* x,
                 std::size_t batch, double* y, Workspace& ws) {
    const auto& k = active_kernels();
    const int h = cfg.history;
    const std::size_t d = cfg.input_dim;
    const std::size_t hid = cfg.hidden_size;
    const std::size_t win = cfg.window_dim();
    reserve_slots(ws, slot_hr(h, h - 1));

    const View wz = rp.get("wz"), wr = rp.get("wr"), wn = rp.get("wn");
    const View uz = rp.get("uz"), ur = rp.get("ur"), un = rp.get("un");
    const View bz = rp.get("bz"), br = rp.get("br"), bn = rp.get("bn");

    auto& h0 = ws.buf(slot_h(h, 0), batch * hid);
    std::memset(h0.data(), 0, batch * hid * sizeof(double));

    for (int t = 0; t < h; ++t) {
        auto& xt = ws.buf(slot_xt(t), batch * d);
        for (std::size_t i = 0; i < batch; ++i) {
            std::memcpy(xt.data() + i * d, x + i * win + t * d, d * sizeof(double));
        }
        const double* h_prev = ws.buf(slot_h(h, t), batch * hid).data();

        auto& z = ws.buf(slot_z(h, t), batch * hid);
        k.gemm_nt(batch, hid, d, xt.data(), wz.w, z.data(), false);
        k.gemm_nt(batch, hid, hid, h_prev, uz.w, z.data(), true);
        add_bias(z.data(), batch, hid, bz.w);
        sigmoid_inplace(z.data(), batch * hid);

        auto& r = ws.buf(slot_r(h, t), batch * hid);
        k.gemm_nt(batch, hid, d, xt.data(), wr.w, r.data(), false);
        k.gemm_nt(batch, hid, hid, h_prev, ur.w, r.data(), true);
        add_bias(r.data(), batch, hid, br.w);
        sigmoid_inplace(r.data(), batch * hid);

        // Reset gate applied to the hidden state before the candidate
        // transform (the cited GRU formulation).
        auto& hr = ws.buf(slot_hr(h, t), batch * hid);
        for (std::size_t i = 0; i < batch * hid; ++i) {
            hr[i] = r[i] * h_prev[i];
        }

        auto& n = ws.buf(slot_n(h, t), batch * hid);
        k.gemm_nt(batch, hid, d, xt.data(), wn.w, n.data(), false);
        k.gemm_nt(batch, hid, hid, hr.data(), un.w, n.data(), true);
        add_bias(n.data(), batch, hid, bn.w);
        tanh_inplace(n.data(), batch * hid);

        auto& h_next = ws.buf(slot_h(h, t + 1), batch * hid);
        for (std::size_t i = 0; i < batch * hid; ++i) {
            h_next[i] = z[i] * h_prev[i] + (1.0 - z[i]) * n[i];
        }
    }

    const View w1 = rp.get("dec_w1"), b1 = rp.get("dec_b1");
    const View w2 = rp.get("dec_w2"), b2 = rp.get("dec_b2");
    const double* h_final = ws.buf(slot_h(h, h), batch * hid).data();
    auto& dec = ws.buf(kDecHidden, batch * w1.rows);
    k.gemm_nt(batch, w1.rows, hid, h_final, w1.w, dec.data(), false);
    add_bias(dec.data(), batch, w1.rows, b1.w);
    relu_inplace(dec.data(), batch * w1.rows);
    k.gemm_nt(batch, w2.rows, w1.rows, dec.data(), w2.w, y, false);
    add_bias(y, batch, w2.rows, b2.w);
}

double loss_from_outputs(const double* y, const double* targets, std::size_t batch,
                         std::size_t out_dim) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch * out_dim; ++i) {
        const double r = y[i] - targets[i];
        total += r * r;
    }
    return total / static_cast<double>(batch);
}

void backward_mlp(const Resolved& rp, const ModelConfig& cfg, const double* x,
                  std::size_t batch, const double* dy, double* grad, Workspace& ws) {
    const auto& k = active_kernels();
    const int n_hidden = cfg.mlp_hidden_layers;

    // dCur starts as dY and walks backwards through the layers.
    auto& dcur = ws.buf(kDH, batch * std::max<std::size_t>(cfg.hidden_size, cfg.output_dim));
    std::memcpy(dcur.data(), dy, batch * cfg.output_dim * sizeof(double));
    std::size_t cur_dim = cfg.output_dim;

    for (int i = n_hidden; i >= 0; --i) {
        const bool is_out = (i == n_hidden);
        const std::string wname = is_out ? "w_out" : "w" + std::to_string(i);
        const std::string bname = is_out ? "b_out" : "b" + std::to_string(i);
        const View w = rp.get(wname);
        const MutView dw = rp.get_mut(wname, grad);
        const MutView db = rp.get_mut(bname, grad);
        const double* input = (i == 0) ? x : ws.buf(slot_act(i - 1), 1).data();

        k.gemm_tn(batch, w.cols, cur_dim, dcur.data(), input, dw.w, true);
        colsum_acc(dcur.data(), batch, cur_dim, db.w);

        if (i == 0) {
            break;
        }
        auto& dprev = ws.buf(kDH2, batch * w.cols);
        k.gemm_nn(batch, w.cols, cur_dim, dcur.data(), w.w, dprev.data(), false);
        // ReLU mask from the stored post-activation (subgradient 0 at 0).
        const double* act = ws.buf(slot_act(i - 1), 1).data();
        for (std::size_t j = 0; j < batch * w.cols; ++j) {
            dprev[j] = act[j] > 0.0 ? dprev[j] : 0.0;
        }
        std::swap(ws.bufs[kDH], ws.bufs[kDH2]);
        cur_dim = w.cols;
    }
}

void backward_gru(const Resolved& rp, const ModelConfig& cfg, std::size_t batch,
                  const double* dy, double* grad, Workspace& ws) {
    const auto& k = active_kernels();
    const int h = cfg.history;
    const std::size_t d = cfg.input_dim;
    const std::size_t hid = cfg.hidden_size;

    const View uz = rp.get("uz"), ur = rp.get("ur"), un = rp.get("un");
    const View w1 = rp.get("dec_w1"), w2 = rp.get("dec_w2");
    const std::size_t dh_dim = w1.rows;

    // Decoder backward.
    const double* dec_act = ws.buf(kDecHidden, 1).data();
    const double* h_final = ws.buf(slot_h(h, h), 1).data();
    {
        const MutView dw2 = rp.get_mut("dec_w2", grad);
        const MutView db2 = rp.get_mut("dec_b2", grad);
        k.gemm_tn(batch, dh_dim, cfg.output_dim, dy, dec_act, dw2.w, true);
        colsum_acc(dy, batch, cfg.output_dim, db2.w);
    }
    auto& ddec = ws.buf(kDDec, batch * dh_dim);
    k.gemm_nn(batch, dh_dim, cfg.output_dim, dy, w2.w, ddec.data(), false);
    for (std::size_t i = 0; i < batch * dh_dim; ++i) {
        ddec[i] = dec_act[i] > 0.0 ? ddec[i] : 0.0;
    }
    {
        const MutView dw1 = rp.get_mut("dec_w1", grad);
        const MutView db1 = rp.get_mut("dec_b1", grad);
        k.gemm_tn(batch, hid, dh_dim, ddec.data(), h_final, dw1.w, true);
        colsum_acc(ddec.data(), batch, dh_dim, db1.w);
    }
    auto& dhcur = ws.buf(kDH, batch * hid);
    k.gemm_nn(batch, hid, dh_dim, ddec.data(), w1.w, dhcur.data(), false);

    const MutView dwz = rp.get_mut("wz", grad), dwr = rp.get_mut("wr", grad),
                  dwn = rp.get_mut("wn", grad);
    const MutView duz = rp.get_mut("uz", grad), dur = rp.get_mut("ur", grad),
                  dun = rp.get_mut("un", grad);
    const MutView dbz = rp.get_mut("bz", grad), dbr = rp.get_mut("br", grad),
                  dbn = rp.get_mut("bn", grad);

    for (int t = h - 1; t >= 0; --t) {
        const double* h_prev = ws.buf(slot_h(h, t), 1).data();
        const double* z = ws.buf(slot_z(h, t), 1).data();
        const double* r = ws.buf(slot_r(h, t), 1).data();
        const double* n = ws.buf(slot_n(h, t), 1).data();
        const double* hr = ws.buf(slot_hr(h, t), 1).data();
        const double* xt = ws.buf(slot_xt(t), 1).data();
        const double* dh = ws.buf(kDH, 1).data();

        // h_t = z h_{t-1} + (1-z) n
        auto& da_n = ws.buf(kDGateA, batch * hid);
        for (std::size_t i = 0; i < batch * hid; ++i) {
            const double dn = dh[i] * (1.0 - z[i]);
            da_n[i] = dn * (1.0 - n[i] * n[i]);
        }
        auto& dhr = ws.buf(kDHr, batch * hid);
        k.gemm_nn(batch, hid, hid, da_n.data(), un.w, dhr.data(), false);

        auto& da_z = ws.buf(kDGateB, batch * hid);
        for (std::size_t i = 0; i < batch * hid; ++i) {
            const double dz = dh[i] * (h_prev[i] - n[i]);
            da_z[i] = dz * z[i] * (1.0 - z[i]);
        }

        k.gemm_tn(batch, d, hid, da_n.data(), xt, dwn.w, true);
        k.gemm_tn(batch, hid, hid, da_n.data(), hr, dun.w, true);
        colsum_acc(da_n.data(), batch, hid, dbn.w);

        k.gemm_tn(batch, d, hid, da_z.data(), xt, dwz.w, true);
        k.gemm_tn(batch, hid, hid, da_z.data(), h_prev, duz.w, true);
        colsum_acc(da_z.data(), batch, hid, dbz.w);

        // dH_prev accumulates: dh*z + dhr*r + da_z Uz + da_r Ur.
        auto& dh_prev = ws.buf(kDH2, batch * hid);
        k.gemm_nn(batch, hid, hid, da_z.data(), uz.w, dh_prev.data(), false);

        // da_r reuses the da_z buffer once dz is folded in.
        auto& da_r = ws.buf(kDGateB, batch * hid);
        for (std::size_t i = 0; i < batch * hid; ++i) {
            const double dr = dhr[i] * h_prev[i];
            da_r[i] = dr * r[i] * (1.0 - r[i]);
        }
        k.gemm_tn(batch, d, hid, da_r.data(), xt, dwr.w, true);
        k.gemm_tn(batch, hid, hid, da_r.data(), h_prev, dur.w, true);
        colsum_acc(da_r.data(), batch, hid, dbr.w);
        k.gemm_nn(batch, hid, hid, da_r.data(), ur.w, dh_prev.data(), true);

        for (std::size_t i = 0; i < batch * hid; ++i) {
            dh_prev[i] += dh[i] * z[i] + dhr[i] * r[i];
        }
        std::swap(ws.bufs[kDH], ws.bufs[kDH2]);
    }
}

}  // namespace

void forward(const ModelParams& p, const double* x, std::size_t batch, double* y,
             Workspace& ws) {
    const Resolved rp{param_layout(p.config), p.theta.data()};
    if (p.config.architecture == Architecture::Mlp) {
        forward_mlp(rp, p.config, x, batch, y, ws);
    } else {
        forward_gru(rp, p.config, x, batch, y, ws);
    }
}

double mse_loss(const ModelParams& p, const double* x, const double* targets,
                std::size_t batch, Workspace& ws) {
    auto& y = ws.buf(kYScratch, batch * p.config.output_dim);
    forward(p, x, batch, y.data(), ws);
    return loss_from_outputs(y.data(), targets, batch, p.config.output_dim);
}

double mse_and_gradient(const ModelParams& p, const double* x, const double* targets,
                        std::size_t batch, std::vector<double>& grad, Workspace& ws) {
    const Resolved rp{param_layout(p.config), p.theta.data()};
    grad.assign(p.theta.size(), 0.0);

    auto& y = ws.buf(kYScratch, batch * p.config.output_dim);
    if (p.config.architecture == Architecture::Mlp) {
        forward_mlp(rp, p.config, x, batch, y.data(), ws);
    } else {
        forward_gru(rp, p.config, x, batch, y.data(), ws);
    }
    const double loss = loss_from_outputs(y.data(), targets, batch, p.config.output_dim);

    auto& dy = ws.buf(kDY, batch * p.config.output_dim);
    const double scale = 2.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch * static_cast<std::size_t>(p.config.output_dim); ++i) {
        dy[i] = scale * (y[i] - targets[i]);
    }

    if (p.config.architecture == Architecture::Mlp) {
        backward_mlp(rp, p.config, x, batch, dy.data(), grad.data(), ws);
    } else {
        backward_gru(rp, p.config, batch, dy.data(), grad.data(), ws);
    }
    return loss;
}

namespace {

constexpr const char* kModelSchema = "stiffdyn-model-v1";

void write_vector_line(std::ofstream& out, const char* key, const std::vector<double>& v) {
    out << "# " << key << "=";
    for (std::size_t i = 0; i < v.size(); ++i) {
        out << (i ? " " : "") << fmt_double(v[i]);
    }
    out << "\n";
}

std::vector<double> parse_vector(const std::string& s) {
    std::istringstream in(s);
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    }
    const ModelConfig& cfg = ckpt.params.config;
    out << "# schema=" << kModelSchema << "\n";
    out << "# architecture=" << to_string(cfg.architecture) << "\n";
    out << "# hidden_size=" << cfg.hidden_size << "\n";
    out << "# history=" << cfg.history << "\n";
    out << "# target=" << to_string(cfg.target) << "\n";
    out << "# input_dim=" << cfg.input_dim << "\n";
    out << "# output_dim=" << cfg.output_dim << "\n";
    out << "# mlp_hidden_layers=" << cfg.mlp_hidden_layers << "\n";
    for (const auto& [key, value] : ckpt.metadata) {
        out << "# meta." << key << "=" << value << "\n";
    }
    write_vector_line(out, "norm_mean", ckpt.norm_mean);
    write_vector_line(out, "norm_std", ckpt.norm_std);
    out << "# n_params=" << ckpt.params.theta.size() << "\n";
    for (const double v : ckpt.params.theta) {
        out << fmt_double(v) << "\n";
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    }
    Checkpoint ckpt;
    std::map<std::string, std::string> header;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error("load_checkpoint: malformed header: " + line);
            }
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            const std::string value = line.substr(eq + 1);
            if (key.rfind("meta.", 0) == 0) {
                ckpt.metadata[key.substr(5)] = value;
            } else {
                header[key] = value;
            }
            continue;
        }
        ckpt.params.theta.push_back(std::stod(line));
    }
    if (header["schema"] != kModelSchema) {
        throw std::runtime_error("load_checkpoint: schema mismatch in " + path.string());
    }
    ModelConfig cfg;
    cfg.architecture = architecture_from_string(header.at("architecture"));
    cfg.hidden_size = std::stoi(header.at("hidden_size"));
    cfg.history = std::stoi(header.at("history"));
    cfg.target = target_mode_from_string(header.at("target"));
    cfg.input_dim = std::stoi(header.at("input_dim"));
    cfg.output_dim = std::stoi(header.at("output_dim"));
    cfg.mlp_hidden_layers = std::stoi(header.at("mlp_hidden_layers"));
    ckpt.params.config = cfg;
    ckpt.norm_mean = parse_vector(header.at("norm_mean"));
    ckpt.norm_std = parse_vector(header.at("norm_std"));
    const std::size_t expected = std::stoull(header.at("n_params"));
    if (ckpt.params.theta.size() != expected || expected != param_count(cfg)) {
        throw std::runtime_error("load_checkpoint: parameter count mismatch in " +
                                 path.string());
    }
    return ckpt;
}

}  // namespace stiffdyn
