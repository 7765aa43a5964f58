#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cfcast/csv.hpp"
#include "cfcast/errors.hpp"
#include "cfcast/series.hpp"
#include "cfcast/stats.hpp"

namespace cfcast::lstm {

struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> data; // row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

/// Single-cell gated recurrent network with a linear head. The four gate
/// weight matrices act on the concatenation [h_{t-1}, x_t], so each has
/// shape H x (H + input_size). norm_min/norm_max record the training-set
/// range used to map observations into [0, 1].
struct LstmNet {
    int hidden_size = 0;
    int input_size = 1;
    int window = 14;
    Matrix w_f, w_i, w_c, w_o;
    std::vector<double> b_f, b_i, b_c, b_o;
    std::vector<double> head_w;
    double head_b = 0.0;
    double norm_min = 0.0;
    double norm_max = 1.0;

    double normalize(double v) const { return (v - norm_min) / (norm_max - norm_min); }
    double denormalize(double v) const { return norm_min + v * (norm_max - norm_min); }
};

struct CellState {
    std::vector<double> h, c;

    static CellState zero(int hidden_size) {
        return {std::vector<double>(static_cast<size_t>(hidden_size), 0.0),
                std::vector<double>(static_cast<size_t>(hidden_size), 0.0)};
    }
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void gate_preact(const Matrix& w, const std::vector<double>& b,
                        std::span<const double> h_prev, std::span<const double> x,
                        std::vector<double>& out) {
    const int hidden = static_cast<int>(h_prev.size());
    out.assign(b.begin(), b.end());
    for (int r = 0; r < w.rows; ++r) {
        double acc = out[static_cast<size_t>(r)];
        for (int c = 0; c < hidden; ++c) acc += w(r, c) * h_prev[static_cast<size_t>(c)];
        for (size_t c = 0; c < x.size(); ++c) {
            acc += w(r, hidden + static_cast<int>(c)) * x[c];
        }
        out[static_cast<size_t>(r)] = acc;
    }
}

} // namespace detail

/// One application of the gate equations:
///   f = sigmoid(W_f [h,x] + b_f),   i = sigmoid(W_i [h,x] + b_i),
///   c~ = tanh(W_c [h,x] + b_c),     c' = f*c + i*c~,
///   o = sigmoid(W_o [h,x] + b_o),   h' = o * tanh(c').
inline CellState cell_step(const LstmNet& net, const CellState& state, std::span<const double> x) {
    if (static_cast<int>(x.size()) != net.input_size) {
        throw ConfigError("cell_step: input size mismatch");
    }
    const int H = net.hidden_size;
    std::vector<double> pf, pi, pc, po;
    detail::gate_preact(net.w_f, net.b_f, state.h, x, pf);
    detail::gate_preact(net.w_i, net.b_i, state.h, x, pi);
    detail::gate_preact(net.w_c, net.b_c, state.h, x, pc);
    detail::gate_preact(net.w_o, net.b_o, state.h, x, po);
    CellState next = CellState::zero(H);
    for (int r = 0; r < H; ++r) {
        const double f = detail::sigmoid(pf[static_cast<size_t>(r)]);
        const double i = detail::sigmoid(pi[static_cast<size_t>(r)]);
        const double ct = std::tanh(pc[static_cast<size_t>(r)]);
        const double o = detail::sigmoid(po[static_cast<size_t>(r)]);
        const double c = f * state.c[static_cast<size_t>(r)] + i * ct;
        next.c[static_cast<size_t>(r)] = c;
        next.h[static_cast<size_t>(r)] = o * std::tanh(c);
    }
    return next;
}

/// One supervised pair: L consecutive normalized values and the next one.
struct Window {
    std::vector<double> inputs;
    double target = 0.0;
};

/// Sliding one-step-ahead framing: (y[t-L..t-1], y[t]) for every valid t, in
/// time order.
inline std::vector<Window> make_windows(std::span<const double> y, int window) {
    if (window < 1) throw ConfigError("window must be >= 1");
    if (y.size() <= static_cast<size_t>(window)) {
        throw DataError("sequence of length " + std::to_string(y.size()) +
                        " too short for window " + std::to_string(window));
    }
    std::vector<Window> out;
    out.reserve(y.size() - static_cast<size_t>(window));
    for (size_t t = static_cast<size_t>(window); t < y.size(); ++t) {
        Window w;
        w.inputs.assign(y.begin() + static_cast<long>(t) - window, y.begin() + static_cast<long>(t));
        w.target = y[t];
        out.push_back(std::move(w));
    }
    return out;
}

/// Per-step activations retained for backpropagation.
struct StepTrace {
    double x = 0.0;
    std::vector<double> f, i, ctilde, o, c, tanh_c, h;
};

struct ForwardTrace {
    std::vector<StepTrace> steps;
    double prediction = 0.0;
};

/// Runs the cell over a normalized window from a zero initial state;
/// prediction = head_w . h_L + head_b.
inline ForwardTrace forward(const LstmNet& net, std::span<const double> window) {
    const int H = net.hidden_size;
    ForwardTrace trace;
    trace.steps.reserve(window.size());
    CellState state = CellState::zero(H);
    std::vector<double> pf, pi, pc, po;
    for (double xv : window) {
        const double x[1] = {xv};
        detail::gate_preact(net.w_f, net.b_f, state.h, x, pf);
        detail::gate_preact(net.w_i, net.b_i, state.h, x, pi);
        detail::gate_preact(net.w_c, net.b_c, state.h, x, pc);
        detail::gate_preact(net.w_o, net.b_o, state.h, x, po);
        StepTrace st;
        st.x = xv;
        st.f.resize(static_cast<size_t>(H));
        st.i.resize(static_cast<size_t>(H));
        st.ctilde.resize(static_cast<size_t>(H));
        st.o.resize(static_cast<size_t>(H));
        st.c.resize(static_cast<size_t>(H));
        st.tanh_c.resize(static_cast<size_t>(H));
        st.h.resize(static_cast<size_t>(H));
        for (int r = 0; r < H; ++r) {
            const size_t k = static_cast<size_t>(r);
            st.f[k] = detail::sigmoid(pf[k]);
            st.i[k] = detail::sigmoid(pi[k]);
            st.ctilde[k] = std::tanh(pc[k]);
            st.o[k] = detail::sigmoid(po[k]);
            st.c[k] = st.f[k] * state.c[k] + st.i[k] * st.ctilde[k];
            st.tanh_c[k] = std::tanh(st.c[k]);
            st.h[k] = st.o[k] * st.tanh_c[k];
        }
        state.c = st.c;
        state.h = st.h;
        trace.steps.push_back(std::move(st));
    }
    double pred = net.head_b;
    for (int r = 0; r < H; ++r) pred += net.head_w[static_cast<size_t>(r)] * state.h[static_cast<size_t>(r)];
    trace.prediction = pred;
    return trace;
}

/// Parameter-shaped gradient accumulator.
struct Gradients {
    Matrix w_f, w_i, w_c, w_o;
    std::vector<double> b_f, b_i, b_c, b_o;
    std::vector<double> head_w;
    double head_b = 0.0;

    static Gradients zero(const LstmNet& net) {
        Gradients g;
        const int H = net.hidden_size;
        const int cols = H + net.input_size;
        g.w_f = Matrix(H, cols);
        g.w_i = Matrix(H, cols);
        g.w_c = Matrix(H, cols);
        g.w_o = Matrix(H, cols);
        g.b_f.assign(static_cast<size_t>(H), 0.0);
        g.b_i.assign(static_cast<size_t>(H), 0.0);
        g.b_c.assign(static_cast<size_t>(H), 0.0);
        g.b_o.assign(static_cast<size_t>(H), 0.0);
        g.head_w.assign(static_cast<size_t>(H), 0.0);
        return g;
    }

    double squared_norm() const {
        double acc = head_b * head_b;
        const auto add = [&acc](const std::vector<double>& v) {
            for (double x : v) acc += x * x;
        };
        add(w_f.data);
        add(w_i.data);
        add(w_c.data);
        add(w_o.data);
        add(b_f);
        add(b_i);
        add(b_c);
        add(b_o);
        add(head_w);
        return acc;
    }

    void scale(double a) {
        const auto mul = [a](std::vector<double>& v) {
            for (double& x : v) x *= a;
        };
        mul(w_f.data);
        mul(w_i.data);
        mul(w_c.data);
        mul(w_o.data);
        mul(b_f);
        mul(b_i);
        mul(b_c);
        mul(b_o);
        mul(head_w);
        head_b *= a;
    }
};

/// Exact gradient of the batch mean squared error with respect to every
/// parameter, by reverse accumulation through the unrolled gate equations.
inline Gradients gradient(const LstmNet& net, std::span<const Window> batch) {
    if (batch.empty()) throw DataError("gradient: empty batch");
    const int H = net.hidden_size;
    Gradients g = Gradients::zero(net);
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    std::vector<double> dh(static_cast<size_t>(H)), dc(static_cast<size_t>(H));
    std::vector<double> gf(static_cast<size_t>(H)), gi(static_cast<size_t>(H)),
        gc(static_cast<size_t>(H)), go(static_cast<size_t>(H));

    for (const Window& w : batch) {
        const ForwardTrace trace = forward(net, w.inputs);
        const double dpred = 2.0 * (trace.prediction - w.target) * inv_b;
        const size_t L = trace.steps.size();

        const auto& last = trace.steps[L - 1];
        for (int r = 0; r < H; ++r) {
            const size_t k = static_cast<size_t>(r);
            g.head_w[k] += dpred * last.h[k];
            dh[k] = dpred * net.head_w[k];
            dc[k] = 0.0;
        }
        g.head_b += dpred;

        for (size_t t = L; t-- > 0;) {
            const StepTrace& st = trace.steps[t];
            const std::vector<double>* h_prev = t > 0 ? &trace.steps[t - 1].h : nullptr;
            const std::vector<double>* c_prev = t > 0 ? &trace.steps[t - 1].c : nullptr;
            for (int r = 0; r < H; ++r) {
                const size_t k = static_cast<size_t>(r);
                const double do_ = dh[k] * st.tanh_c[k];
                dc[k] += dh[k] * st.o[k] * (1.0 - st.tanh_c[k] * st.tanh_c[k]);
                const double cp = c_prev ? (*c_prev)[k] : 0.0;
                const double df = dc[k] * cp;
                const double di = dc[k] * st.ctilde[k];
                const double dct = dc[k] * st.i[k];
                gf[k] = df * st.f[k] * (1.0 - st.f[k]);
                gi[k] = di * st.i[k] * (1.0 - st.i[k]);
                gc[k] = dct * (1.0 - st.ctilde[k] * st.ctilde[k]);
                go[k] = do_ * st.o[k] * (1.0 - st.o[k]);
            }
            // Accumulate parameter gradients and the carried state
            // gradients; z = [h_prev, x].
            for (int r = 0; r < H; ++r) {
                const size_t k = static_cast<size_t>(r);
                for (int c = 0; c < H; ++c) {
                    const double hp = h_prev ? (*h_prev)[static_cast<size_t>(c)] : 0.0;
                    g.w_f(r, c) += gf[k] * hp;
                    g.w_i(r, c) += gi[k] * hp;
                    g.w_c(r, c) += gc[k] * hp;
                    g.w_o(r, c) += go[k] * hp;
                }
                g.w_f(r, H) += gf[k] * st.x;
                g.w_i(r, H) += gi[k] * st.x;
                g.w_c(r, H) += gc[k] * st.x;
                g.w_o(r, H) += go[k] * st.x;
                g.b_f[k] += gf[k];
                g.b_i[k] += gi[k];
                g.b_c[k] += gc[k];
                g.b_o[k] += go[k];
            }
            if (t > 0) {
                std::vector<double> dh_prev(static_cast<size_t>(H), 0.0);
                for (int c = 0; c < H; ++c) {
                    double acc = 0.0;
                    for (int r = 0; r < H; ++r) {
                        const size_t k = static_cast<size_t>(r);
                        acc += net.w_f(r, c) * gf[k] + net.w_i(r, c) * gi[k] +
                               net.w_c(r, c) * gc[k] + net.w_o(r, c) * go[k];
                    }
                    dh_prev[static_cast<size_t>(c)] = acc;
                }
                for (int r = 0; r < H; ++r) {
                    const size_t k = static_cast<size_t>(r);
                    dc[k] *= st.f[k];
                    dh[k] = dh_prev[k];
                }
            }
        }
    }
    return g;
}

/// Batch mean squared error on the normalized scale.
inline double mse_loss(const LstmNet& net, std::span<const Window> batch) {
    double acc = 0.0;
    for (const Window& w : batch) {
        const double e = forward(net, w.inputs).prediction - w.target;
        acc += e * e;
    }
    return acc / static_cast<double>(batch.size());
}

struct TrainConfig {
    int hidden_size = 32;
    int window = 14;
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 0.1;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
};

struct TrainResult {
    LstmNet net;
    std::vector<double> loss_curve; // full-training-set MSE after each epoch
};

/// Seed-deterministic initialization: every parameter uniform in
/// (-0.08, 0.08), drawn in the fixed order w_f, b_f, w_i, b_i, w_c, b_c,
/// w_o, b_o, head_w, head_b; the forget bias is then set to 1.
inline LstmNet init_net(const TrainConfig& config, double norm_min, double norm_max) {
    LstmNet net;
    net.hidden_size = config.hidden_size;
    net.input_size = 1;
    net.window = config.window;
    net.norm_min = norm_min;
    net.norm_max = norm_max;
    const int H = config.hidden_size;
    const int cols = H + 1;
    Rng rng(config.seed);
    const auto fill_mat = [&](Matrix& m) {
        m = Matrix(H, cols);
        for (double& v : m.data) v = rng.uniform(-0.08, 0.08);
    };
    const auto fill_vec = [&](std::vector<double>& v) {
        v.resize(static_cast<size_t>(H));
        for (double& x : v) x = rng.uniform(-0.08, 0.08);
    };
    fill_mat(net.w_f);
    fill_vec(net.b_f);
    fill_mat(net.w_i);
    fill_vec(net.b_i);
    fill_mat(net.w_c);
    fill_vec(net.b_c);
    fill_mat(net.w_o);
    fill_vec(net.b_o);
    fill_vec(net.head_w);
    net.head_b = rng.uniform(-0.08, 0.08);
    std::fill(net.b_f.begin(), net.b_f.end(), 1.0);
    return net;
}

/// Mini-batch gradient descent on the one-step-ahead squared error, with
/// full backpropagation through each window and a global L2 gradient clip.
/// Batches are consecutive slices of the window list, so a run is fully
/// determined by (data, config).
inline TrainResult train(const TimeSeries& series, const TrainConfig& config) {
    if (!series.fully_observed()) {
        throw DataError("lstm train requires a fully observed series; interpolate first");
    }
    if (static_cast<int>(series.size()) <= config.window + 10) {
        throw DataError("series of length " + std::to_string(series.size()) +
                        " too short for window " + std::to_string(config.window));
    }
    double lo = series.value(0), hi = series.value(0);
    for (double v : series.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) {
        throw DataError("cannot normalize a constant series (norm_max == norm_min)");
    }

    TrainResult res{init_net(config, lo, hi), {}};
    LstmNet& net = res.net;

    std::vector<double> y_norm(series.size());
    for (size_t i = 0; i < series.size(); ++i) y_norm[i] = net.normalize(series.value(i));
    const auto windows = make_windows(y_norm, config.window);

    const auto apply = [](std::vector<double>& p, const std::vector<double>& g, double lr) {
        for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t begin = 0; begin < windows.size();
             begin += static_cast<size_t>(config.batch_size)) {
            const size_t count =
                std::min(static_cast<size_t>(config.batch_size), windows.size() - begin);
            Gradients g = gradient(net, std::span<const Window>(windows.data() + begin, count));
            const double norm = std::sqrt(g.squared_norm());
            if (config.clip_norm > 0.0 && norm > config.clip_norm) {
                g.scale(config.clip_norm / norm);
            }
            const double lr = config.learning_rate;
            apply(net.w_f.data, g.w_f.data, lr);
            apply(net.w_i.data, g.w_i.data, lr);
            apply(net.w_c.data, g.w_c.data, lr);
            apply(net.w_o.data, g.w_o.data, lr);
            apply(net.b_f, g.b_f, lr);
            apply(net.b_i, g.b_i, lr);
            apply(net.b_c, g.b_c, lr);
            apply(net.b_o, g.b_o, lr);
            apply(net.head_w, g.head_w, lr);
            net.head_b -= lr * g.head_b;
        }
        const double loss = mse_loss(net, windows);
        if (!std::isfinite(loss)) {
            throw FitError("lstm training diverged at epoch " + std::to_string(epoch + 1));
        }
        res.loss_curve.push_back(loss);
    }
    return res;
}

/// Rolls the one-step prediction forward `horizon` times, feeding each
/// normalized prediction back into the window, then denormalizes and floors
/// the outputs at zero.
inline std::vector<double> forecast_recursive(const LstmNet& net, std::span<const double> tail,
                                              int horizon) {
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (tail.size() < static_cast<size_t>(net.window)) {
        throw DataError("forecast needs the last " + std::to_string(net.window) +
                        " observations, got " + std::to_string(tail.size()));
    }
    std::vector<double> window(tail.end() - net.window, tail.end());
    for (double& v : window) v = net.normalize(v);
    std::vector<double> out;
    out.reserve(static_cast<size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        const double pred = forward(net, window).prediction;
        window.erase(window.begin());
        window.push_back(pred);
        out.push_back(std::max(0.0, net.denormalize(pred)));
    }
    return out;
}

// --- parameter file (versioned text, exact round trip) ---

inline std::string to_text(const LstmNet& net) {
    std::ostringstream out;
    out << "cfcast-lstm 1\n";
    out << "hidden_size " << net.hidden_size << "\n";
    out << "input_size " << net.input_size << "\n";
    out << "window " << net.window << "\n";
    out << "norm_min " << format_double(net.norm_min) << "\n";
    out << "norm_max " << format_double(net.norm_max) << "\n";
    const auto dump = [&](const char* name, const std::vector<double>& v) {
        out << name;
        for (double x : v) out << " " << format_double(x);
        out << "\n";
    };
    dump("w_f", net.w_f.data);
    dump("b_f", net.b_f);
    dump("w_i", net.w_i.data);
    dump("b_i", net.b_i);
    dump("w_c", net.w_c.data);
    dump("b_c", net.b_c);
    dump("w_o", net.w_o.data);
    dump("b_o", net.b_o);
    dump("head_w", net.head_w);
    out << "head_b " << format_double(net.head_b) << "\n";
    return out.str();
}

inline LstmNet from_text(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "cfcast-lstm" || version != 1) {
        throw DataError("not a cfcast-lstm v1 parameter file");
    }
    LstmNet net;
    std::string key;
    in >> key >> net.hidden_size >> key >> net.input_size >> key >> net.window;
    in >> key >> net.norm_min >> key >> net.norm_max;
    const int H = net.hidden_size;
    const int cols = H + net.input_size;
    const auto read_vec = [&](const char* expect, std::vector<double>& v, size_t n) {
        in >> key;
        if (key != expect) throw DataError("lstm parameter file: expected " + std::string(expect));
        v.resize(n);
        for (double& x : v) in >> x;
    };
    const auto read_mat = [&](const char* expect, Matrix& m) {
        m = Matrix(H, cols);
        read_vec(expect, m.data, m.data.size());
    };
    read_mat("w_f", net.w_f);
    read_vec("b_f", net.b_f, static_cast<size_t>(H));
    read_mat("w_i", net.w_i);
    read_vec("b_i", net.b_i, static_cast<size_t>(H));
    read_mat("w_c", net.w_c);
    read_vec("b_c", net.b_c, static_cast<size_t>(H));
    read_mat("w_o", net.w_o);
    read_vec("b_o", net.b_o, static_cast<size_t>(H));
    read_vec("head_w", net.head_w, static_cast<size_t>(H));
    in >> key >> net.head_b;
    if (!in) throw DataError("truncated lstm parameter file");
    return net;
}

inline void save(const LstmNet& net, const std::filesystem::path& path) {
    write_text_atomic(path, to_text(net));
}

inline LstmNet load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

} // namespace cfcast::lstm
