#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cfcast/counterfactual.hpp"
#include "cfcast/errors.hpp"
#include "cfcast/series.hpp"

namespace cfcast::cli {

/// Everything a pipeline run needs. Populated in three layers: built-in
/// defaults, then the config file, then command-line flags (flags win). The
/// seed additionally falls back to the CFCAST_SEED environment variable
/// when neither file nor flag set it.
struct RunConfig {
    std::string input;
    std::vector<Variable> variables{Variable::no2};
    std::vector<std::string> models{"sarima", "lstm", "gbt"};
    SplitSpec split{Date(2017, 1, 1), Date(2019, 12, 31), Date(2020, 1, 1), Date(2020, 4, 30)};
    std::optional<SplitSpec> backtest_split; // default: see default_backtest_split()
    int seasonal_period = 7;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = "out";
    int max_gap = 3;

    // model.sarima.*
    sarima::SarimaGrid sarima_grid;
    // model.lstm.*
    lstm::TrainConfig lstm;
    // model.gbt.*
    gbt::BoostConfig gbt_boost;
    std::set<int> gbt_lags{1, 2, 3, 7, 14};
    bool gbt_calendar = true;

    // importance.*
    double importance_cutoff = 150.0;
    double importance_split_fraction = 0.8;
};

namespace detail {

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : value) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline int to_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got \"" + value + "\"");
    }
}

inline double to_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got \"" + value + "\"");
    }
}

inline bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected a boolean, got \"" + value + "\"");
}

inline Date to_date(const std::string& key, const std::string& value) {
    const auto d = Date::parse(value);
    if (!d) throw ConfigError(key + ": expected YYYY-MM-DD, got \"" + value + "\"");
    return *d;
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const auto& item : split_list(value)) out.push_back(to_int(key, item));
    return out;
}

} // namespace detail

/// Applies one sectioned key. Unknown keys are configuration errors so that
/// typos fail loudly.
inline void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "input") {
        cfg.input = value;
    } else if (key == "variables" || key == "variable") {
        cfg.variables.clear();
        for (const auto& name : split_list(value)) {
            const auto v = variable_from_name(name);
            if (!v) throw ConfigError("unknown variable \"" + name + "\"");
            cfg.variables.push_back(*v);
        }
        if (cfg.variables.empty()) throw ConfigError("variables: empty list");
    } else if (key == "models" || key == "model") {
        cfg.models.clear();
        for (const auto& name : split_list(value)) {
            if (name != "sarima" && name != "lstm" && name != "gbt") {
                throw ConfigError("unknown model \"" + name + "\" (expected sarima, lstm, gbt)");
            }
            cfg.models.push_back(name);
        }
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        cfg.seed_set = true;
    } else if (key == "seasonal_period") {
        cfg.seasonal_period = to_int(key, value);
    } else if (key == "interpolate.max_gap") {
        cfg.max_gap = to_int(key, value);
    } else if (key == "split.train_start") {
        cfg.split.train_start = to_date(key, value);
    } else if (key == "split.train_end") {
        cfg.split.train_end = to_date(key, value);
    } else if (key == "split.predict_start") {
        cfg.split.predict_start = to_date(key, value);
    } else if (key == "split.predict_end") {
        cfg.split.predict_end = to_date(key, value);
    } else if (key == "backtest.train_start" || key == "backtest.train_end" ||
               key == "backtest.predict_start" || key == "backtest.predict_end") {
        if (!cfg.backtest_split) cfg.backtest_split = default_backtest_split();
        if (key == "backtest.train_start") cfg.backtest_split->train_start = to_date(key, value);
        if (key == "backtest.train_end") cfg.backtest_split->train_end = to_date(key, value);
        if (key == "backtest.predict_start") {
            cfg.backtest_split->predict_start = to_date(key, value);
        }
        if (key == "backtest.predict_end") cfg.backtest_split->predict_end = to_date(key, value);
    } else if (key == "model.sarima.max_p") {
        cfg.sarima_grid.max_p = to_int(key, value);
    } else if (key == "model.sarima.max_q") {
        cfg.sarima_grid.max_q = to_int(key, value);
    } else if (key == "model.sarima.max_P") {
        cfg.sarima_grid.max_P = to_int(key, value);
    } else if (key == "model.sarima.max_Q") {
        cfg.sarima_grid.max_Q = to_int(key, value);
    } else if (key == "model.sarima.d") {
        cfg.sarima_grid.d_values = to_int_list(key, value);
    } else if (key == "model.sarima.D") {
        cfg.sarima_grid.D_values = to_int_list(key, value);
    } else if (key == "model.sarima.max_total_order") {
        cfg.sarima_grid.max_total_order = to_int(key, value);
    } else if (key == "model.lstm.hidden_size") {
        cfg.lstm.hidden_size = to_int(key, value);
    } else if (key == "model.lstm.window") {
        cfg.lstm.window = to_int(key, value);
    } else if (key == "model.lstm.epochs") {
        cfg.lstm.epochs = to_int(key, value);
    } else if (key == "model.lstm.batch_size") {
        cfg.lstm.batch_size = to_int(key, value);
    } else if (key == "model.lstm.learning_rate") {
        cfg.lstm.learning_rate = to_double(key, value);
    } else if (key == "model.lstm.clip_norm") {
        cfg.lstm.clip_norm = to_double(key, value);
    } else if (key == "model.gbt.num_rounds") {
        cfg.gbt_boost.num_rounds = to_int(key, value);
    } else if (key == "model.gbt.max_depth") {
        cfg.gbt_boost.max_depth = to_int(key, value);
    } else if (key == "model.gbt.learning_rate") {
        cfg.gbt_boost.learning_rate = to_double(key, value);
    } else if (key == "model.gbt.lambda") {
        cfg.gbt_boost.lambda = to_double(key, value);
    } else if (key == "model.gbt.gamma") {
        cfg.gbt_boost.gamma = to_double(key, value);
    } else if (key == "model.gbt.min_child_weight") {
        cfg.gbt_boost.min_child_weight = to_double(key, value);
    } else if (key == "model.gbt.lags") {
        cfg.gbt_lags.clear();
        for (int lag : to_int_list(key, value)) cfg.gbt_lags.insert(lag);
    } else if (key == "model.gbt.calendar") {
        cfg.gbt_calendar = to_bool(key, value);
    } else if (key == "importance.cutoff") {
        cfg.importance_cutoff = to_double(key, value);
    } else if (key == "importance.split_fraction") {
        cfg.importance_split_fraction = to_double(key, value);
    } else {
        throw ConfigError("unknown config key \"" + key + "\"");
    }
}

/// Flat key-value file: one `key = value` per line, '#' starts a comment.
inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = detail::trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key = value");
        }
        apply_key(cfg, detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1)));
    }
}

/// Resolves the seed fallback and cross-field consistency. Call once after
/// all layers are applied.
inline void finalize(RunConfig& cfg) {
    if (!cfg.seed_set) {
        if (const char* env = std::getenv("CFCAST_SEED")) {
            try {
                cfg.seed = static_cast<std::uint64_t>(std::stoull(env));
                cfg.seed_set = true;
            } catch (const std::exception&) {
                throw ConfigError("CFCAST_SEED is not an integer: \"" + std::string(env) + "\"");
            }
        }
    }
    cfg.split.validate();
    if (cfg.backtest_split) cfg.backtest_split->validate();
    if (cfg.seasonal_period < 1) throw ConfigError("seasonal_period must be >= 1");
    if (cfg.max_gap < 0) throw ConfigError("interpolate.max_gap must be >= 0");
    cfg.sarima_grid.s = cfg.seasonal_period;
    cfg.lstm.seed = cfg.seed;
    if (cfg.models.empty()) throw ConfigError("no models selected");
}

/// Materializes a ModelChoice for one of the configured model names.
inline ModelChoice make_model(const RunConfig& cfg, const std::string& name) {
    if (name == "sarima") {
        SarimaModelConfig m;
        m.grid = cfg.sarima_grid;
        return ModelChoice::sarima_model(m);
    }
    if (name == "lstm") {
        LstmModelConfig m;
        m.train = cfg.lstm;
        return ModelChoice::lstm_model(m);
    }
    if (name == "gbt") {
        GbtModelConfig m;
        m.boost = cfg.gbt_boost;
        m.lags = cfg.gbt_lags;
        m.calendar = cfg.gbt_calendar;
        return ModelChoice::gbt_model(m);
    }
    throw ConfigError("unknown model \"" + name + "\"");
}

} // namespace cfcast::cli
