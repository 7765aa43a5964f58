#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cfcast/csv.hpp"
#include "cfcast/errors.hpp"
#include "cfcast/series.hpp"

namespace cfcast::gbt {

enum class Loss { squared, logistic };

struct BoostConfig {
    int num_rounds = 200;
    double learning_rate = 0.3;
    int max_depth = 4;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
    Loss loss = Loss::squared;
};

/// First and second derivatives of the loss at the current predictions.
struct GradHess {
    std::vector<double> g, h;
};

/// Row-major feature matrix.
struct FeatureMatrix {
    size_t rows = 0, cols = 0;
    std::vector<double> data;

    FeatureMatrix() = default;
    FeatureMatrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double at(size_t i, size_t j) const { return data[i * cols + j]; }
    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    std::span<const double> row(size_t i) const { return {data.data() + i * cols, cols}; }
};

/// Node of a regression tree, stored in a flat array. Internal nodes keep
/// the split gain for the importance report.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;
    double gain = 0.0;

    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    int leaf_index(std::span<const double> row) const {
        int at = 0;
        while (!nodes[static_cast<size_t>(at)].is_leaf()) {
            const TreeNode& n = nodes[static_cast<size_t>(at)];
            at = row[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return at;
    }

    double predict(std::span<const double> row) const {
        return nodes[static_cast<size_t>(leaf_index(row))].weight;
    }
};

/// Additive ensemble: prediction = base_score + learning_rate * sum of tree
/// outputs (on the log-odds scale for logistic loss).
struct TreeEnsemble {
    double base_score = 0.0;
    std::vector<Tree> trees;
    BoostConfig config;
    std::vector<std::string> feature_names;

    double predict(std::span<const double> row) const {
        double acc = base_score;
        for (const Tree& t : trees) acc += config.learning_rate * t.predict(row);
        return acc;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Squared loss l = (y - yhat)^2 / 2: g = yhat - y, h = 1.
/// Logistic loss on log-odds yhat: g = sigmoid(yhat) - y, h = p(1-p).
inline GradHess grad_hess(Loss loss, std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw DataError("grad_hess: length mismatch");
    GradHess gh;
    gh.g.resize(y.size());
    gh.h.resize(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
        if (loss == Loss::squared) {
            gh.g[i] = yhat[i] - y[i];
            gh.h[i] = 1.0;
        } else {
            if (y[i] != 0.0 && y[i] != 1.0) {
                throw DataError("logistic loss needs 0/1 labels, got " + format_double(y[i]));
            }
            const double p = sigmoid(yhat[i]);
            gh.g[i] = p - y[i];
            gh.h[i] = p * (1.0 - p);
        }
    }
    return gh;
}

/// Optimal leaf weight -G / (H + lambda).
inline double leaf_weight(double G, double H, double lambda) {
    if (!(H + lambda > 0.0)) {
        throw FitError("degenerate leaf: H + lambda = " + format_double(H + lambda));
    }
    return -G / (H + lambda);
}

/// Objective reduction from splitting one leaf into two, minus the per-leaf
/// penalty gamma.
inline double split_gain(double G_L, double H_L, double G_R, double H_R, double lambda,
                         double gamma) {
    return 0.5 * (G_L * G_L / (H_L + lambda) + G_R * G_R / (H_R + lambda) -
                  (G_L + G_R) * (G_L + G_R) / (H_L + H_R + lambda)) -
           gamma;
}

struct SplitCandidate {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

/// Exact greedy search: per feature, sort the node's samples by value and
/// scan prefix sums of (g, h), scoring the midpoint between every pair of
/// distinct adjacent values. Returns the best positive-gain split whose
/// children both reach min_child_weight, or nullopt. Ties break toward the
/// lower feature index, then the lower threshold.
inline std::optional<SplitCandidate> best_split(const FeatureMatrix& X,
                                                std::span<const size_t> rows,
                                                std::span<const double> g,
                                                std::span<const double> h, double lambda,
                                                double gamma, double min_child_weight) {
    if (rows.size() < 2) return std::nullopt;
    double G_total = 0.0, H_total = 0.0;
    for (size_t r : rows) {
        G_total += g[r];
        H_total += h[r];
    }

    std::optional<SplitCandidate> best;
    std::vector<std::pair<double, size_t>> order(rows.size());
    for (size_t j = 0; j < X.cols; ++j) {
        for (size_t k = 0; k < rows.size(); ++k) {
            order[k] = {X.at(rows[k], j), rows[k]};
        }
        std::stable_sort(order.begin(), order.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        double G_L = 0.0, H_L = 0.0;
        for (size_t k = 0; k + 1 < order.size(); ++k) {
            G_L += g[order[k].second];
            H_L += h[order[k].second];
            if (order[k].first == order[k + 1].first) continue;
            const double G_R = G_total - G_L;
            const double H_R = H_total - H_L;
            if (H_L < min_child_weight || H_R < min_child_weight) continue;
            const double gain = split_gain(G_L, H_L, G_R, H_R, lambda, gamma);
            if (gain <= 0.0) continue;
            if (!best || gain > best->gain) {
                best = SplitCandidate{static_cast<int>(j),
                                      0.5 * (order[k].first + order[k + 1].first), gain};
            }
        }
    }
    return best;
}

namespace detail {

inline int build_node(Tree& tree, const FeatureMatrix& X, std::vector<size_t>& rows,
                      std::span<const double> g, std::span<const double> h,
                      const BoostConfig& config, int depth_budget) {
    double G = 0.0, H = 0.0;
    for (size_t r : rows) {
        G += g[r];
        H += h[r];
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::optional<SplitCandidate> split;
    if (depth_budget > 0 && rows.size() >= 2) {
        split = best_split(X, rows, g, h, config.lambda, config.gamma, config.min_child_weight);
    }
    if (!split) {
        tree.nodes[static_cast<size_t>(id)].weight = leaf_weight(G, H, config.lambda);
        return id;
    }

    std::vector<size_t> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (size_t r : rows) {
        if (X.at(r, static_cast<size_t>(split->feature)) <= split->threshold) {
            left_rows.push_back(r);
        } else {
            right_rows.push_back(r);
        }
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left = build_node(tree, X, left_rows, g, h, config, depth_budget - 1);
    const int right = build_node(tree, X, right_rows, g, h, config, depth_budget - 1);
    TreeNode& node = tree.nodes[static_cast<size_t>(id)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.gain = split->gain;
    node.left = left;
    node.right = right;
    return id;
}

} // namespace detail

/// Grows one tree by recursive exact-greedy splitting. Stops at the depth
/// budget or when no positive-gain split exists; every leaf gets the optimal
/// weight -G/(H+lambda).
inline Tree build_tree(const FeatureMatrix& X, std::span<const size_t> rows,
                       std::span<const double> g, std::span<const double> h,
                       const BoostConfig& config, int depth_budget) {
    if (rows.empty()) throw DataError("build_tree: no samples");
    Tree tree;
    std::vector<size_t> all(rows.begin(), rows.end());
    detail::build_node(tree, X, all, g, h, config, depth_budget);
    return tree;
}

/// Additive training: each round fits one tree to the current (g, h) and
/// advances the predictions by learning_rate times its output.
inline TreeEnsemble fit_boost(const FeatureMatrix& X, std::span<const double> y,
                              const BoostConfig& config,
                              std::vector<std::string> feature_names = {}) {
    if (X.rows < 2) throw DataError("fit_boost: need at least 2 rows");
    if (X.rows != y.size()) throw DataError("fit_boost: X/y length mismatch");
    if (feature_names.empty()) {
        for (size_t j = 0; j < X.cols; ++j) feature_names.push_back("f" + std::to_string(j));
    }
    if (feature_names.size() != X.cols) {
        throw ConfigError("fit_boost: feature name count mismatch");
    }

    TreeEnsemble ens;
    ens.config = config;
    ens.feature_names = std::move(feature_names);

    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(y.size());
    if (config.loss == Loss::logistic) {
        for (double v : y) {
            if (v != 0.0 && v != 1.0) throw DataError("logistic loss needs 0/1 labels");
        }
        if (y_mean <= 0.0 || y_mean >= 1.0) {
            throw DataError("single-class labels: cannot fit a logistic ensemble");
        }
        ens.base_score = std::log(y_mean / (1.0 - y_mean));
    } else {
        ens.base_score = y_mean;
    }

    std::vector<double> preds(y.size(), ens.base_score);
    std::vector<size_t> all_rows(X.rows);
    for (size_t i = 0; i < X.rows; ++i) all_rows[i] = i;

    for (int round = 0; round < config.num_rounds; ++round) {
        const GradHess gh = grad_hess(config.loss, y, preds);
        Tree tree = build_tree(X, all_rows, gh.g, gh.h, config, config.max_depth);
        for (size_t i = 0; i < X.rows; ++i) {
            preds[i] += config.learning_rate * tree.predict(X.row(i));
        }
        ens.trees.push_back(std::move(tree));
    }
    return ens;
}

/// Total split gain per feature, normalized to sum to 1 when any split
/// exists. Stump-only ensembles yield an empty map.
inline std::map<std::string, double> feature_importance(const TreeEnsemble& ens) {
    std::map<std::string, double> out;
    double total = 0.0;
    for (const Tree& t : ens.trees) {
        for (const TreeNode& n : t.nodes) {
            if (n.is_leaf()) continue;
            out[ens.feature_names[static_cast<size_t>(n.feature)]] += n.gain;
            total += n.gain;
        }
    }
    if (out.empty()) return out;
    for (auto& [name, gain] : out) gain /= total;
    return out;
}

// --- supervised framing of daily series ---

struct LagDataset {
    FeatureMatrix X;
    std::vector<double> y;
    std::vector<Date> dates;
    std::vector<std::string> feature_names;
};

/// Builds one row per day t with features {y_{t-l}} for the given lags and,
/// optionally, day-of-week (0-6) and day-of-year (1-366). Rows with a
/// missing target or any missing lag are dropped.
inline LagDataset lag_features(const TimeSeries& s, const std::set<int>& lags, bool calendar) {
    if (lags.empty()) throw ConfigError("lag_features: need at least one lag");
    for (int l : lags) {
        if (l < 1) throw ConfigError("lag_features: lags must be >= 1");
    }
    const int max_lag = *lags.rbegin();
    if (static_cast<size_t>(max_lag) >= s.size()) {
        throw DataError("lag_features: max lag " + std::to_string(max_lag) +
                        " >= series length " + std::to_string(s.size()));
    }

    LagDataset ds;
    for (int l : lags) ds.feature_names.push_back("lag_" + std::to_string(l));
    if (calendar) {
        ds.feature_names.push_back("dow");
        ds.feature_names.push_back("doy");
    }
    const size_t cols = ds.feature_names.size();

    std::vector<double> flat;
    for (size_t t = static_cast<size_t>(max_lag); t < s.size(); ++t) {
        if (s.missing(t)) continue;
        bool ok = true;
        for (int l : lags) {
            if (s.missing(t - static_cast<size_t>(l))) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        for (int l : lags) flat.push_back(s.value(t - static_cast<size_t>(l)));
        if (calendar) {
            flat.push_back(static_cast<double>(s.date(t).day_of_week()));
            flat.push_back(static_cast<double>(s.date(t).day_of_year()));
        }
        ds.y.push_back(s.value(t));
        ds.dates.push_back(s.date(t));
    }
    ds.X.rows = ds.y.size();
    ds.X.cols = cols;
    ds.X.data = std::move(flat);
    return ds;
}

/// One-step rolling forecast over lag features, mirroring the recursive
/// scheme used for the recurrent model: each prediction is appended to the
/// history and feeds later lags.
inline std::vector<double> forecast_recursive(const TreeEnsemble& ens, const TimeSeries& train,
                                              const std::set<int>& lags, bool calendar,
                                              int horizon) {
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (!train.fully_observed()) {
        throw DataError("gbt forecast requires a fully observed series");
    }
    const int max_lag = *lags.rbegin();
    if (static_cast<size_t>(max_lag) > train.size()) {
        throw DataError("gbt forecast: history shorter than the largest lag");
    }
    std::vector<double> history(train.values().begin(), train.values().end());
    std::vector<double> out;
    std::vector<double> row;
    for (int h = 0; h < horizon; ++h) {
        row.clear();
        for (int l : lags) row.push_back(history[history.size() - static_cast<size_t>(l)]);
        if (calendar) {
            const Date d = train.end() + (h + 1);
            row.push_back(static_cast<double>(d.day_of_week()));
            row.push_back(static_cast<double>(d.day_of_year()));
        }
        const double pred = ens.predict(row);
        history.push_back(pred);
        out.push_back(pred);
    }
    return out;
}

// --- AQI influence analysis ---

struct InfluenceOptions {
    double cutoff = 150.0;
    double split_fraction = 0.8; // chronological train share
    BoostConfig boost{.num_rounds = 120, .learning_rate = 0.3, .max_depth = 4,
                      .lambda = 1.0,     .gamma = 0.0,         .min_child_weight = 1.0,
                      .loss = Loss::logistic};
};

struct InfluenceResult {
    std::map<std::string, double> importance;
    double holdout_accuracy = 0.0;
    size_t train_rows = 0;
    size_t holdout_rows = 0;
};

/// Classifies exceedance days (target = 1 when AQI > cutoff) from the six
/// pollutant concentrations with a logistic-loss ensemble on a
/// chronological split, and reports normalized split-gain importance plus
/// holdout accuracy.
inline InfluenceResult aqi_influence(const std::vector<TimeSeries>& pollutants,
                                     const TimeSeries& aqi, const InfluenceOptions& options = {}) {
    if (pollutants.empty()) throw ConfigError("aqi_influence: no predictor series");
    if (!(options.split_fraction > 0.0 && options.split_fraction < 1.0)) {
        throw ConfigError("aqi_influence: split_fraction must be in (0, 1)");
    }

    // Align by date; keep days where the target and every predictor are
    // observed.
    std::vector<std::string> names;
    for (const auto& p : pollutants) names.emplace_back(variable_name(p.variable()));
    std::vector<double> flat;
    std::vector<double> labels;
    for (size_t i = 0; i < aqi.size(); ++i) {
        if (aqi.missing(i)) continue;
        const Date d = aqi.date(i);
        bool ok = true;
        std::vector<double> row;
        for (const auto& p : pollutants) {
            const auto j = p.index_of(d);
            if (!j || p.missing(*j)) {
                ok = false;
                break;
            }
            row.push_back(p.value(*j));
        }
        if (!ok) continue;
        flat.insert(flat.end(), row.begin(), row.end());
        labels.push_back(aqi.value(i) > options.cutoff ? 1.0 : 0.0);
    }
    const size_t n = labels.size();
    if (n < 4) throw DataError("aqi_influence: fewer than 4 complete rows");

    const size_t n_train = static_cast<size_t>(static_cast<double>(n) * options.split_fraction);
    if (n_train < 2 || n_train >= n) {
        throw DataError("aqi_influence: degenerate chronological split");
    }

    const auto single_class = [](std::span<const double> v) {
        bool any0 = false, any1 = false;
        for (double x : v) (x > 0.5 ? any1 : any0) = true;
        return !(any0 && any1);
    };
    if (single_class(labels) || single_class(std::span<const double>(labels).first(n_train))) {
        throw DataError("aqi_influence: labels are single-class at cutoff " +
                        format_double(options.cutoff) + "; choose a different cutoff");
    }

    FeatureMatrix X(n, pollutants.size());
    X.data = std::move(flat);
    FeatureMatrix X_train(n_train, X.cols);
    std::copy(X.data.begin(), X.data.begin() + static_cast<long>(n_train * X.cols),
              X_train.data.begin());
    const std::span<const double> y_train(labels.data(), n_train);

    BoostConfig config = options.boost;
    config.loss = Loss::logistic;
    const TreeEnsemble ens = fit_boost(X_train, y_train, config, names);

    InfluenceResult res;
    res.importance = feature_importance(ens);
    res.train_rows = n_train;
    res.holdout_rows = n - n_train;
    size_t correct = 0;
    for (size_t i = n_train; i < n; ++i) {
        const bool predicted = ens.predict(X.row(i)) > 0.0;
        if (predicted == (labels[i] > 0.5)) ++correct;
    }
    res.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(n - n_train);
    return res;
}

// --- tree-list text format (preorder per tree) ---

namespace detail {

inline void dump_node(std::ostringstream& out, const Tree& tree, int id) {
    const TreeNode& n = tree.nodes[static_cast<size_t>(id)];
    if (n.is_leaf()) {
        out << "leaf " << format_double(n.weight) << "\n";
        return;
    }
    out << "split " << n.feature << " " << format_double(n.threshold) << " "
        << format_double(n.gain) << "\n";
    dump_node(out, tree, n.left);
    dump_node(out, tree, n.right);
}

inline int parse_node(std::istringstream& in, Tree& tree) {
    std::string kind;
    in >> kind;
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (kind == "leaf") {
        in >> tree.nodes[static_cast<size_t>(id)].weight;
        return id;
    }
    if (kind != "split") throw DataError("gbt model file: unexpected token \"" + kind + "\"");
    int feature = 0;
    double threshold = 0.0, gain = 0.0;
    in >> feature >> threshold >> gain;
    const int left = parse_node(in, tree);
    const int right = parse_node(in, tree);
    TreeNode& n = tree.nodes[static_cast<size_t>(id)];
    n.feature = feature;
    n.threshold = threshold;
    n.gain = gain;
    n.left = left;
    n.right = right;
    return id;
}

} // namespace detail

inline std::string to_text(const TreeEnsemble& ens) {
    std::ostringstream out;
    out << "cfcast-gbt 1\n";
    out << "loss " << (ens.config.loss == Loss::squared ? "squared" : "logistic") << "\n";
    out << "base_score " << format_double(ens.base_score) << "\n";
    out << "learning_rate " << format_double(ens.config.learning_rate) << "\n";
    out << "lambda " << format_double(ens.config.lambda) << "\n";
    out << "gamma " << format_double(ens.config.gamma) << "\n";
    out << "max_depth " << ens.config.max_depth << "\n";
    out << "min_child_weight " << format_double(ens.config.min_child_weight) << "\n";
    out << "features " << ens.feature_names.size();
    for (const auto& name : ens.feature_names) out << " " << name;
    out << "\n";
    out << "trees " << ens.trees.size() << "\n";
    for (const Tree& t : ens.trees) {
        out << "tree " << t.nodes.size() << "\n";
        detail::dump_node(out, t, 0);
    }
    return out.str();
}

inline TreeEnsemble from_text(const std::string& text) {
    std::istringstream in(text);
    std::string magic, key, loss;
    int version = 0;
    in >> magic >> version;
    if (magic != "cfcast-gbt" || version != 1) throw DataError("not a cfcast-gbt v1 model file");
    TreeEnsemble ens;
    in >> key >> loss;
    ens.config.loss = loss == "squared" ? Loss::squared : Loss::logistic;
    in >> key >> ens.base_score;
    in >> key >> ens.config.learning_rate;
    in >> key >> ens.config.lambda;
    in >> key >> ens.config.gamma;
    in >> key >> ens.config.max_depth;
    in >> key >> ens.config.min_child_weight;
    size_t n_features = 0;
    in >> key >> n_features;
    ens.feature_names.resize(n_features);
    for (auto& name : ens.feature_names) in >> name;
    size_t n_trees = 0;
    in >> key >> n_trees;
    ens.config.num_rounds = static_cast<int>(n_trees);
    for (size_t t = 0; t < n_trees; ++t) {
        size_t n_nodes = 0;
        in >> key >> n_nodes;
        std::string body;
        std::getline(in, body); // consume end of the "tree N" line
        Tree tree;
        std::string block;
        for (size_t i = 0; i < n_nodes; ++i) {
            std::getline(in, body);
            block += body + "\n";
        }
        std::istringstream tree_in(block);
        detail::parse_node(tree_in, tree);
        if (tree.nodes.size() != n_nodes) throw DataError("gbt model file: node count mismatch");
        ens.trees.push_back(std::move(tree));
    }
    if (!in) throw DataError("truncated gbt model file");
    return ens;
}

inline void save(const TreeEnsemble& ens, const std::filesystem::path& path) {
    write_text_atomic(path, to_text(ens));
}

inline TreeEnsemble load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

} // namespace cfcast::gbt
