#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cfcast/errors.hpp"
#include "cfcast/gbt.hpp"
#include "cfcast/lstm.hpp"
#include "cfcast/sarima.hpp"
#include "cfcast/series.hpp"

namespace cfcast {

/// Mean squared error between aligned sequences.
inline double mse(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) {
        throw DataError("mse: length mismatch (" + std::to_string(observed.size()) + " vs " +
                        std::to_string(predicted.size()) + ")");
    }
    if (observed.empty()) throw DataError("mse: empty sequences");
    double acc = 0.0;
    for (size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - predicted[i];
        acc += e * e;
    }
    return acc / static_cast<double>(observed.size());
}

// --- model selection ---

struct SarimaModelConfig {
    /// When set, fit exactly this spec; otherwise run the AIC grid search.
    std::optional<sarima::SarimaSpec> fixed_spec;
    sarima::SarimaGrid grid;
};

struct LstmModelConfig {
    lstm::TrainConfig train;
};

struct GbtModelConfig {
    gbt::BoostConfig boost;
    std::set<int> lags{1, 2, 3, 7, 14};
    bool calendar = true;
};

struct ModelChoice {
    enum class Kind { sarima, lstm, gbt };

    std::variant<SarimaModelConfig, LstmModelConfig, GbtModelConfig> config;

    Kind kind() const { return static_cast<Kind>(config.index()); }

    std::string name() const {
        switch (kind()) {
            case Kind::sarima: return "sarima";
            case Kind::lstm: return "lstm";
            case Kind::gbt: return "gbt";
        }
        return "?";
    }

    static ModelChoice sarima_model(SarimaModelConfig cfg = {}) { return {std::move(cfg)}; }
    static ModelChoice lstm_model(LstmModelConfig cfg = {}) { return {std::move(cfg)}; }
    static ModelChoice gbt_model(GbtModelConfig cfg = {}) { return {std::move(cfg)}; }
};

/// What a fitted model produces for the prediction window. Interval bands
/// are present only when the model defines them.
struct ModelForecast {
    std::vector<double> mean;
    std::optional<std::vector<double>> lower95;
    std::optional<std::vector<double>> upper95;
    std::string summary; // flat key-value description of the fitted model
};

/// A forecaster consumes the (fully observed) training window and a horizon.
/// The std::function seam lets tests substitute stub models.
using Forecaster = std::function<ModelForecast(const TimeSeries& train, int horizon)>;

inline Forecaster make_forecaster(const ModelChoice& model) {
    switch (model.kind()) {
        case ModelChoice::Kind::sarima: {
            const auto cfg = std::get<SarimaModelConfig>(model.config);
            return [cfg](const TimeSeries& train, int horizon) {
                sarima::SarimaFit fit;
                std::string note;
                if (cfg.fixed_spec) {
                    fit = sarima::fit(*cfg.fixed_spec, train);
                } else {
                    auto res = sarima::grid_search(train, cfg.grid);
                    fit = res.best;
                    int failed = 0;
                    for (const auto& cand : res.table) failed += cand.fit ? 0 : 1;
                    note = "grid_candidates = " + std::to_string(res.table.size()) +
                           "\ngrid_failures = " + std::to_string(failed) + "\n";
                }
                const auto fc = sarima::forecast(fit, train, horizon);
                ModelForecast out;
                out.mean = fc.mean;
                out.lower95 = fc.lower95;
                out.upper95 = fc.upper95;
                out.summary = sarima::to_report(fit) + note;
                return out;
            };
        }
        case ModelChoice::Kind::lstm: {
            const auto cfg = std::get<LstmModelConfig>(model.config);
            return [cfg](const TimeSeries& train, int horizon) {
                const auto res = lstm::train(train, cfg.train);
                const auto fc = lstm::forecast_recursive(res.net, train.values(), horizon);
                ModelForecast out;
                out.mean = fc;
                std::ostringstream summary;
                summary << "hidden_size = " << cfg.train.hidden_size << "\n"
                        << "window = " << cfg.train.window << "\n"
                        << "epochs = " << cfg.train.epochs << "\n"
                        << "learning_rate = " << format_double(cfg.train.learning_rate) << "\n"
                        << "seed = " << cfg.train.seed << "\n"
                        << "final_training_mse = "
                        << (res.loss_curve.empty() ? "n/a" : format_double(res.loss_curve.back()))
                        << "\n"
                        << "intervals = none\n";
                out.summary = summary.str();
                return out;
            };
        }
        case ModelChoice::Kind::gbt: {
            const auto cfg = std::get<GbtModelConfig>(model.config);
            return [cfg](const TimeSeries& train, int horizon) {
                const auto ds = gbt::lag_features(train, cfg.lags, cfg.calendar);
                const auto ens = gbt::fit_boost(ds.X, ds.y, cfg.boost, ds.feature_names);
                ModelForecast out;
                out.mean = gbt::forecast_recursive(ens, train, cfg.lags, cfg.calendar, horizon);
                std::ostringstream summary;
                summary << "num_rounds = " << cfg.boost.num_rounds << "\n"
                        << "max_depth = " << cfg.boost.max_depth << "\n"
                        << "learning_rate = " << format_double(cfg.boost.learning_rate) << "\n"
                        << "lambda = " << format_double(cfg.boost.lambda) << "\n"
                        << "features =";
                for (const auto& name : ds.feature_names) summary << " " << name;
                summary << "\nintervals = none\n";
                out.summary = summary.str();
                return out;
            };
        }
    }
    throw ConfigError("unknown model kind");
}

// --- counterfactual experiment ---

struct DailyPoint {
    Date date;
    std::optional<double> observed;
    double predicted = 0.0;
    std::optional<double> lower95;
    std::optional<double> upper95;
};

struct CounterfactualReport {
    Variable variable{};
    SplitSpec split;
    std::string model_name;
    std::string model_summary;
    std::vector<DailyPoint> daily;
    double mean_excess = 0.0;  // mean(observed - predicted) over observed days
    double total_excess = 0.0; // sum over observed days
    double pct_change = 0.0;   // 100 * mean_excess / mean(predicted)
    int missing_observed_days = 0;
};

struct CounterfactualOptions {
    int max_gap = 3; // longest missing run interpolated in the train window
};

/// Fits on the train window (after short-gap interpolation), forecasts the
/// predict window, and joins forecasts with observations by date. Days with
/// a missing observation are reported but excluded from every summary.
inline CounterfactualReport run_counterfactual(const TimeSeries& s, const SplitSpec& split_spec,
                                               const Forecaster& forecaster,
                                               const std::string& model_name,
                                               const CounterfactualOptions& options = {}) {
    const auto [train_raw, predict] = split(s, split_spec);
    const auto interp = interpolate_missing(train_raw, options.max_gap);
    if (!interp.unfilled.empty()) {
        std::string msg = "train window has " + std::to_string(interp.unfilled.size()) +
                          " gap(s) longer than " + std::to_string(options.max_gap) + " days:";
        for (const auto& gap : interp.unfilled) {
            msg += " " + gap.start.to_string() + "(" + std::to_string(gap.length) + ")";
        }
        throw DataError(msg);
    }
    const TimeSeries& train = interp.series;
    const int horizon = static_cast<int>(predict.size());

    const ModelForecast fc = forecaster(train, horizon);
    if (fc.mean.size() != static_cast<size_t>(horizon)) {
        throw FitError("forecaster returned " + std::to_string(fc.mean.size()) +
                       " values for horizon " + std::to_string(horizon));
    }

    CounterfactualReport report;
    report.variable = s.variable();
    report.split = split_spec;
    report.model_name = model_name;
    report.model_summary = fc.summary;

    double sum_excess = 0.0, sum_pred = 0.0;
    int observed_days = 0;
    for (int i = 0; i < horizon; ++i) {
        DailyPoint p;
        p.date = predict.date(static_cast<size_t>(i));
        p.predicted = fc.mean[static_cast<size_t>(i)];
        if (fc.lower95) p.lower95 = (*fc.lower95)[static_cast<size_t>(i)];
        if (fc.upper95) p.upper95 = (*fc.upper95)[static_cast<size_t>(i)];
        if (!predict.missing(static_cast<size_t>(i))) {
            p.observed = predict.value(static_cast<size_t>(i));
            sum_excess += *p.observed - p.predicted;
            sum_pred += p.predicted;
            ++observed_days;
        } else {
            ++report.missing_observed_days;
        }
        report.daily.push_back(std::move(p));
    }
    if (observed_days == 0) {
        throw DataError("predict window has no observed days to compare against");
    }
    report.total_excess = sum_excess;
    report.mean_excess = sum_excess / observed_days;
    const double mean_pred = sum_pred / observed_days;
    report.pct_change = mean_pred != 0.0 ? 100.0 * report.mean_excess / mean_pred
                                         : std::numeric_limits<double>::quiet_NaN();
    return report;
}

inline CounterfactualReport run_counterfactual(const TimeSeries& s, const SplitSpec& split_spec,
                                               const ModelChoice& model,
                                               const CounterfactualOptions& options = {}) {
    return run_counterfactual(s, split_spec, make_forecaster(model), model.name(), options);
}

// --- pre-intervention backtest ---

struct BacktestResult {
    Variable variable{};
    std::string model_name;
    double mse = 0.0;
    SplitSpec split;
};

/// The held-out assessment window: two full years of history, then the four
/// months directly before the intervention year.
inline SplitSpec default_backtest_split() {
    return SplitSpec{Date(2017, 1, 1), Date(2018, 12, 31), Date(2019, 1, 1), Date(2019, 4, 30)};
}

inline BacktestResult run_backtest(const TimeSeries& s, const Forecaster& forecaster,
                                   const std::string& model_name,
                                   const std::optional<SplitSpec>& split_spec = std::nullopt,
                                   const CounterfactualOptions& options = {}) {
    const SplitSpec spec = split_spec.value_or(default_backtest_split());
    if (spec.train_start < s.start() || spec.predict_end > s.end()) {
        throw DataError("series range [" + s.start().to_string() + ", " + s.end().to_string() +
                        "] does not cover the backtest window [" + spec.train_start.to_string() +
                        ", " + spec.predict_end.to_string() + "]");
    }
    const auto report = run_counterfactual(s, spec, forecaster, model_name, options);
    double acc = 0.0;
    int n = 0;
    for (const auto& p : report.daily) {
        if (!p.observed) continue;
        const double e = *p.observed - p.predicted;
        acc += e * e;
        ++n;
    }
    return BacktestResult{s.variable(), model_name, acc / n, spec};
}

inline BacktestResult run_backtest(const TimeSeries& s, const ModelChoice& model,
                                   const std::optional<SplitSpec>& split_spec = std::nullopt,
                                   const CounterfactualOptions& options = {}) {
    return run_backtest(s, make_forecaster(model), model.name(), split_spec, options);
}

// --- model comparison ---

struct ModelComparison {
    struct Row {
        std::string model_name;
        std::optional<BacktestResult> result;
        std::string error; // set when the model failed
    };
    /// Successful rows sorted by ascending MSE, then failures in input order.
    std::vector<Row> rows;
};

inline ModelComparison compare_models(const TimeSeries& s, const std::vector<ModelChoice>& models,
                                      const std::optional<SplitSpec>& split_spec = std::nullopt,
                                      const CounterfactualOptions& options = {}) {
    if (models.empty()) throw ConfigError("compare_models: no models given");
    std::vector<ModelComparison::Row> ok, failed;
    for (const auto& model : models) {
        ModelComparison::Row row;
        row.model_name = model.name();
        try {
            row.result = run_backtest(s, model, split_spec, options);
            ok.push_back(std::move(row));
        } catch (const std::exception& e) {
            row.error = e.what();
            failed.push_back(std::move(row));
        }
    }
    if (ok.empty()) {
        std::string msg = "all models failed on " + std::string(variable_name(s.variable())) + ":";
        for (const auto& row : failed) msg += "\n  " + row.model_name + ": " + row.error;
        throw FitError(msg);
    }
    std::stable_sort(ok.begin(), ok.end(), [](const auto& a, const auto& b) {
        return a.result->mse < b.result->mse;
    });
    ModelComparison cmp;
    cmp.rows = std::move(ok);
    for (auto& row : failed) cmp.rows.push_back(std::move(row));
    return cmp;
}

} // namespace cfcast
