#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cfcast/config.hpp"
#include "cfcast/counterfactual.hpp"
#include "cfcast/csv.hpp"
#include "cfcast/svg.hpp"

namespace cfcast::cli {

namespace fs = std::filesystem;

namespace detail {

inline fs::path out_path(const RunConfig& cfg, const std::string& name) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
    return fs::path(cfg.out_dir) / name;
}

inline const char* series_color(size_t i) {
    static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                    "#66a61e", "#e6ab02", "#a6761d"};
    return palette[i % 7];
}

inline std::string month_label(int year, unsigned month) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u", year, month);
    return buf;
}

} // namespace detail

/// Per-variable calendar heatmaps (one per year), the weekly-mean line plot
/// across variables, and the weekly-mean CSVs behind it.
inline std::vector<fs::path> cmd_inspect(const RunConfig& cfg) {
    std::vector<fs::path> files;
    std::vector<svg::LineSeries> weekly_lines;
    Date weekly_start;
    bool have_start = false;

    for (size_t vi = 0; vi < cfg.variables.size(); ++vi) {
        const Variable var = cfg.variables[vi];
        const std::string var_name(variable_name(var));
        const TimeSeries s = load_csv(cfg.input, var);

        for (int year = s.start().year(); year <= s.end().year(); ++year) {
            const Date jan1(year, 1, 1);
            const Date dec31(year, 12, 31);
            const int days = dec31 - jan1 + 1;
            std::vector<double> by_doy(static_cast<size_t>(days), TimeSeries::kMissing);
            for (int d = 0; d < days; ++d) {
                const auto idx = s.index_of(jan1 + d);
                if (idx && !s.missing(*idx)) by_doy[static_cast<size_t>(d)] = s.value(*idx);
            }
            const auto path = detail::out_path(
                cfg, "heatmap_" + var_name + "_" + std::to_string(year) + ".svg");
            write_text_atomic(path, svg::calendar_heatmap(var_name + " " + std::to_string(year),
                                                          year, by_doy));
            files.push_back(path);
        }

        const auto weekly = weekly_mean(s);
        std::string csv_text = "week_start," + var_name + "\n";
        svg::LineSeries line{var_name, detail::series_color(vi), {}};
        for (const auto& wm : weekly) {
            csv_text += wm.week_start.to_string() + ",";
            if (wm.mean) csv_text += format_double(*wm.mean);
            csv_text += "\n";
            line.values.push_back(wm.mean ? *wm.mean : TimeSeries::kMissing);
        }
        const auto csv_path = detail::out_path(cfg, "weekly_" + var_name + ".csv");
        write_text_atomic(csv_path, csv_text);
        files.push_back(csv_path);
        if (!have_start) {
            weekly_start = s.start();
            have_start = true;
        }
        weekly_lines.push_back(std::move(line));
    }

    const auto chart_path = detail::out_path(cfg, "weekly_lines.svg");
    write_text_atomic(chart_path, svg::line_chart("weekly means", weekly_start, weekly_lines,
                                                  std::nullopt, 7));
    files.push_back(chart_path);
    return files;
}

/// Exceedance-classification importance: bar chart + CSV + text summary.
inline std::vector<fs::path> cmd_importance(const RunConfig& cfg) {
    std::vector<TimeSeries> pollutants;
    for (Variable v : kPollutants) pollutants.push_back(load_csv(cfg.input, v));
    const TimeSeries aqi = load_csv(cfg.input, Variable::aqi);

    gbt::InfluenceOptions options;
    options.cutoff = cfg.importance_cutoff;
    options.split_fraction = cfg.importance_split_fraction;
    const auto res = gbt::aqi_influence(pollutants, aqi, options);

    // Rank descending by share for the chart and CSV.
    std::vector<std::pair<std::string, double>> ranked(res.importance.begin(),
                                                       res.importance.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<fs::path> files;
    std::string csv_text = "feature,normalized_gain\n";
    for (const auto& [name, gain] : ranked) {
        csv_text += name + "," + format_double(gain) + "\n";
    }
    const auto csv_path = detail::out_path(cfg, "importance.csv");
    write_text_atomic(csv_path, csv_text);
    files.push_back(csv_path);

    const auto svg_path = detail::out_path(cfg, "importance.svg");
    write_text_atomic(svg_path,
                      svg::bar_chart("influence on AQI exceedance (cutoff " +
                                         svg::tick_label(cfg.importance_cutoff) + ")",
                                     ranked));
    files.push_back(svg_path);

    std::ostringstream summary;
    summary << "cutoff = " << format_double(cfg.importance_cutoff) << "\n";
    summary << "split_fraction = " << format_double(cfg.importance_split_fraction) << "\n";
    summary << "train_rows = " << res.train_rows << "\n";
    summary << "holdout_rows = " << res.holdout_rows << "\n";
    summary << "holdout_accuracy = " << format_double(res.holdout_accuracy) << "\n";
    if (!ranked.empty()) summary << "top_feature = " << ranked.front().first << "\n";
    const auto txt_path = detail::out_path(cfg, "importance_summary.txt");
    write_text_atomic(txt_path, summary.str());
    files.push_back(txt_path);
    return files;
}

namespace detail {

struct BacktestCell {
    bool ok = false;
    double mse = 0.0;
    std::string error;
};

} // namespace detail

/// Model-by-variable MSE table on the held-out pre-intervention window, as
/// CSV and aligned text, plus an observed-vs-predicted plot per successful
/// cell. A failed cell renders as FAIL(reason) without aborting the rest.
inline std::vector<fs::path> cmd_backtest(const RunConfig& cfg) {
    const SplitSpec spec = cfg.backtest_split.value_or(default_backtest_split());
    std::vector<fs::path> files;
    std::map<std::pair<std::string, std::string>, detail::BacktestCell> cells;
    size_t ok_count = 0;

    for (Variable var : cfg.variables) {
        const std::string var_name(variable_name(var));
        const TimeSeries s = load_csv(cfg.input, var);
        for (const auto& model_name : cfg.models) {
            detail::BacktestCell cell;
            try {
                const auto report = run_counterfactual(s, spec, make_model(cfg, model_name),
                                                       CounterfactualOptions{cfg.max_gap});
                std::vector<double> obs, pred;
                for (const auto& p : report.daily) {
                    if (!p.observed) continue;
                    obs.push_back(*p.observed);
                    pred.push_back(p.predicted);
                }
                cell.ok = true;
                cell.mse = mse(obs, pred);
                ++ok_count;

                std::vector<svg::LineSeries> lines(2);
                lines[0] = {"observed", "#444444", {}};
                lines[1] = {"predicted", "#d95f02", {}};
                for (const auto& p : report.daily) {
                    lines[0].values.push_back(p.observed ? *p.observed : TimeSeries::kMissing);
                    lines[1].values.push_back(p.predicted);
                }
                const auto plot_path = detail::out_path(
                    cfg, "backtest_" + var_name + "_" + model_name + ".svg");
                write_text_atomic(plot_path,
                                  svg::line_chart(var_name + " backtest, " + model_name +
                                                      " (mse " + svg::tick_label(cell.mse) + ")",
                                                  spec.predict_start, lines));
                files.push_back(plot_path);
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            cells[{var_name, model_name}] = std::move(cell);
        }
    }
    if (ok_count == 0) {
        std::string msg = "every backtest cell failed:";
        for (const auto& [key, cell] : cells) {
            msg += "\n  " + key.first + "/" + key.second + ": " + cell.error;
        }
        throw FitError(msg);
    }

    const auto render = [&](const detail::BacktestCell& cell) {
        if (cell.ok) return format_double(cell.mse);
        std::string reason = cell.error.substr(0, cell.error.find('\n'));
        if (reason.size() > 60) reason = reason.substr(0, 57) + "...";
        for (char& c : reason) {
            if (c == ',') c = ';';
        }
        return "FAIL(" + reason + ")";
    };

    std::string csv_text = "variable";
    for (const auto& m : cfg.models) csv_text += "," + m;
    csv_text += "\n";
    for (Variable var : cfg.variables) {
        csv_text += std::string(variable_name(var));
        for (const auto& m : cfg.models) {
            csv_text += "," + render(cells.at({std::string(variable_name(var)), m}));
        }
        csv_text += "\n";
    }
    const auto csv_path = detail::out_path(cfg, "backtest_mse.csv");
    write_text_atomic(csv_path, csv_text);
    files.push_back(csv_path);

    std::ostringstream txt;
    txt << "mean squared error, train " << spec.train_start.to_string() << ".."
        << spec.train_end.to_string() << ", predict " << spec.predict_start.to_string() << ".."
        << spec.predict_end.to_string() << "\n\n";
    txt << std::left;
    txt.width(10);
    txt << "variable";
    for (const auto& m : cfg.models) {
        txt.width(24);
        txt << m;
    }
    txt << "\n";
    for (Variable var : cfg.variables) {
        txt.width(10);
        txt << std::string(variable_name(var));
        for (const auto& m : cfg.models) {
            txt.width(24);
            txt << render(cells.at({std::string(variable_name(var)), m}));
        }
        txt << "\n";
    }
    const auto txt_path = detail::out_path(cfg, "backtest_mse.txt");
    write_text_atomic(txt_path, txt.str());
    files.push_back(txt_path);
    return files;
}

/// Counterfactual run per (variable, model): daily CSV, line plot with the
/// interval band where the model provides one, monthly observed-vs-predicted
/// box plot, and a text summary of the excess.
inline std::vector<fs::path> cmd_counterfactual(const RunConfig& cfg) {
    std::vector<fs::path> files;
    for (Variable var : cfg.variables) {
        const std::string var_name(variable_name(var));
        const TimeSeries s = load_csv(cfg.input, var);
        for (const auto& model_name : cfg.models) {
            const auto report = run_counterfactual(s, cfg.split, make_model(cfg, model_name),
                                                   CounterfactualOptions{cfg.max_gap});
            const std::string stem = "counterfactual_" + var_name + "_" + model_name;

            std::string csv_text = "date,observed,predicted,lower95,upper95\n";
            for (const auto& p : report.daily) {
                csv_text += p.date.to_string() + ",";
                if (p.observed) csv_text += format_double(*p.observed);
                csv_text += "," + format_double(p.predicted) + ",";
                if (p.lower95) csv_text += format_double(*p.lower95);
                csv_text += ",";
                if (p.upper95) csv_text += format_double(*p.upper95);
                csv_text += "\n";
            }
            const auto csv_path = detail::out_path(cfg, stem + ".csv");
            write_text_atomic(csv_path, csv_text);
            files.push_back(csv_path);

            std::vector<svg::LineSeries> lines(2);
            lines[0] = {"observed", "#444444", {}};
            lines[1] = {"predicted", "#d95f02", {}};
            std::optional<svg::Band> band;
            if (report.daily.front().lower95) band = svg::Band{};
            for (const auto& p : report.daily) {
                lines[0].values.push_back(p.observed ? *p.observed : TimeSeries::kMissing);
                lines[1].values.push_back(p.predicted);
                if (band) {
                    band->lower.push_back(*p.lower95);
                    band->upper.push_back(*p.upper95);
                }
            }
            const auto line_path = detail::out_path(cfg, stem + ".svg");
            write_text_atomic(line_path,
                              svg::line_chart(var_name + " counterfactual, " + model_name,
                                              cfg.split.predict_start, lines, band));
            files.push_back(line_path);

            // Monthly paired boxes over the predict window.
            std::map<std::pair<int, unsigned>, std::pair<std::vector<double>,
                                                         std::vector<double>>> by_month;
            for (const auto& p : report.daily) {
                if (!p.observed) continue;
                auto& bucket = by_month[{p.date.year(), p.date.month()}];
                bucket.first.push_back(*p.observed);
                bucket.second.push_back(p.predicted);
            }
            std::vector<svg::BoxGroup> groups;
            for (const auto& [ym, pair] : by_month) {
                groups.push_back(svg::BoxGroup{detail::month_label(ym.first, ym.second),
                                               box_stats(pair.first), box_stats(pair.second)});
            }
            const auto box_path = detail::out_path(cfg, stem + "_box.svg");
            write_text_atomic(box_path,
                              svg::box_plot(var_name + " monthly, " + model_name, groups));
            files.push_back(box_path);

            std::ostringstream summary;
            summary << "variable = " << var_name << "\n";
            summary << "model = " << model_name << "\n";
            summary << "train = " << cfg.split.train_start.to_string() << ".."
                    << cfg.split.train_end.to_string() << "\n";
            summary << "predict = " << cfg.split.predict_start.to_string() << ".."
                    << cfg.split.predict_end.to_string() << "\n";
            summary << "mean_excess = " << format_double(report.mean_excess) << "\n";
            summary << "total_excess = " << format_double(report.total_excess) << "\n";
            summary << "pct_change = " << format_double(report.pct_change) << "\n";
            summary << "missing_observed_days = " << report.missing_observed_days << "\n";
            summary << "intervals = " << (band ? "95% band" : "none") << "\n";
            summary << "--- model ---\n" << report.model_summary;
            const auto txt_path = detail::out_path(cfg, stem + "_summary.txt");
            write_text_atomic(txt_path, summary.str());
            files.push_back(txt_path);
        }
    }
    return files;
}

} // namespace cfcast::cli
