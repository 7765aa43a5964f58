// cfcast: counterfactual forecasting of daily air-quality series.
//
// Subcommands:
//   inspect         calendar heatmaps + weekly-mean plot/CSVs
//   importance      pollutant influence on AQI exceedance
//   backtest        model-by-variable MSE table on a held-out window
//   counterfactual  fit pre-window, forecast post-window, report the excess
//
// Exit codes: 0 ok, 2 configuration, 3 data, 4 model fit, 5 I/O, 1 other.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "cfcast/cfcast.hpp"

namespace {

struct Flags {
    std::string config;
    std::string input;
    std::string variable;
    std::string model;
    std::string train_start, train_end, predict_start, predict_end;
    std::string out_dir;
    long long seed = -1;
    bool seed_given = false;
};

void add_common(CLI::App* cmd, Flags& flags) {
    cmd->add_option("--config", flags.config, "key = value config file (flags override it)");
    cmd->add_option("--input", flags.input, "input CSV (date column + variable columns)");
    cmd->add_option("--variable", flags.variable,
                    "comma list from aqi,so2,no2,co,o3,pm10,pm2_5");
    cmd->add_option("--model", flags.model, "comma list from sarima,lstm,gbt");
    cmd->add_option("--train-start", flags.train_start, "YYYY-MM-DD");
    cmd->add_option("--train-end", flags.train_end, "YYYY-MM-DD");
    cmd->add_option("--predict-start", flags.predict_start, "YYYY-MM-DD");
    cmd->add_option("--predict-end", flags.predict_end, "YYYY-MM-DD");
    cmd->add_option("--seed", flags.seed, "RNG seed (falls back to CFCAST_SEED, then 0)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--out-dir", flags.out_dir, "output directory (default: out)");
}

cfcast::cli::RunConfig resolve(const Flags& flags) {
    cfcast::cli::RunConfig cfg;
    if (!flags.config.empty()) cfcast::cli::apply_config_file(cfg, flags.config);
    if (!flags.input.empty()) cfcast::cli::apply_key(cfg, "input", flags.input);
    if (!flags.variable.empty()) cfcast::cli::apply_key(cfg, "variables", flags.variable);
    if (!flags.model.empty()) cfcast::cli::apply_key(cfg, "models", flags.model);
    if (!flags.train_start.empty()) {
        cfcast::cli::apply_key(cfg, "split.train_start", flags.train_start);
    }
    if (!flags.train_end.empty()) cfcast::cli::apply_key(cfg, "split.train_end", flags.train_end);
    if (!flags.predict_start.empty()) {
        cfcast::cli::apply_key(cfg, "split.predict_start", flags.predict_start);
    }
    if (!flags.predict_end.empty()) {
        cfcast::cli::apply_key(cfg, "split.predict_end", flags.predict_end);
    }
    if (flags.seed >= 0) cfcast::cli::apply_key(cfg, "seed", std::to_string(flags.seed));
    if (!flags.out_dir.empty()) cfcast::cli::apply_key(cfg, "out_dir", flags.out_dir);
    cfcast::cli::finalize(cfg);
    if (cfg.input.empty()) {
        throw cfcast::ConfigError("no input file: set --input or the config key \"input\"");
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual forecasting toolkit for daily pollutant series"};
    app.require_subcommand(1);
    app.footer("exit codes: 0 ok, 2 configuration, 3 data, 4 model fit, 5 I/O, 1 other");

    Flags flags;
    auto* inspect = app.add_subcommand(
        "inspect", "calendar heatmaps per year and weekly-mean series plot");
    auto* importance = app.add_subcommand(
        "importance", "pollutant influence on AQI exceedance (0/1 at a cutoff)");
    auto* backtest = app.add_subcommand(
        "backtest", "MSE table for every model and variable on a held-out window");
    auto* counterfactual = app.add_subcommand(
        "counterfactual", "fit the pre-window, forecast the post-window, report the excess");
    for (auto* cmd : {inspect, importance, backtest, counterfactual}) add_common(cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const auto cfg = resolve(flags);
        std::vector<std::filesystem::path> files;
        if (inspect->parsed()) files = cfcast::cli::cmd_inspect(cfg);
        if (importance->parsed()) files = cfcast::cli::cmd_importance(cfg);
        if (backtest->parsed()) files = cfcast::cli::cmd_backtest(cfg);
        if (counterfactual->parsed()) files = cfcast::cli::cmd_counterfactual(cfg);
        for (const auto& f : files) std::cout << f.string() << "\n";
        return 0;
    } catch (const cfcast::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const cfcast::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const cfcast::FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 4;
    } catch (const cfcast::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
