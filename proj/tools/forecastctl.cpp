// forecastctl: drives the forecasting pipeline from a JSON run config.
//
//   forecastctl <subcommand> --config run.json [--out DIR] [--seed N] [--workers N]
//
// Subcommands: run | generate | ingest | features | train | forecast |
// evaluate | diagnose. Exit codes: 0 success (including partial model
// failures, which are recorded in the manifest), 2 config error, 3 data
// error.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mpf/errors.hpp"
#include "mpf/pipeline.hpp"

using namespace mpf;

int main(int argc, char** argv) {
    CLI::App app{"granular construction-material price forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int workers_override = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config JSON")->required();
        cmd->add_option("--out", out_override, "output directory override");
        cmd->add_option("--seed", seed_override, "seed override")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--workers", workers_override, "worker thread count override");
    };

    auto* cmd_run = app.add_subcommand("run", "full pipeline");
    auto* cmd_generate = app.add_subcommand("generate", "synthesize the panel");
    auto* cmd_ingest = app.add_subcommand("ingest", "ingest and preprocess an external panel");
    auto* cmd_features = app.add_subcommand("features", "build feature matrices");
    auto* cmd_train = app.add_subcommand("train", "train/fit the configured models");
    auto* cmd_forecast = app.add_subcommand("forecast", "walk-forward test forecasts");
    auto* cmd_evaluate = app.add_subcommand("evaluate", "metrics, summary and DM tables");
    auto* cmd_diagnose = app.add_subcommand("diagnose", "EDA diagnostic csv files");
    for (auto* cmd : {cmd_run, cmd_generate, cmd_ingest, cmd_features, cmd_train, cmd_forecast,
                      cmd_evaluate, cmd_diagnose})
        add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = pipeline::load_run_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (seed_set) cfg.seed = seed_override;
        if (workers_override > 0) cfg.workers = workers_override;
        cfg.validate();

        if (cmd_run->parsed()) return pipeline::run_pipeline(cfg);
        if (cmd_generate->parsed() || cmd_ingest->parsed()) {
            if (cmd_generate->parsed() && !cfg.generate)
                throw ConfigError("generate requires a data.generate block");
            if (cmd_ingest->parsed() && !cfg.panel_csv)
                throw ConfigError("ingest requires data.panel_csv");
            pipeline::stage_data(cfg);
        }
        if (cmd_features->parsed()) pipeline::stage_features(cfg);
        if (cmd_train->parsed()) pipeline::stage_train(cfg);
        if (cmd_forecast->parsed()) pipeline::stage_forecast(cfg);
        if (cmd_evaluate->parsed()) pipeline::stage_evaluate(cfg);
        if (cmd_diagnose->parsed()) pipeline::stage_diagnose(cfg);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
