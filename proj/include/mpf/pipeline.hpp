#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpf/attention.hpp"
#include "mpf/features.hpp"
#include "mpf/forecast.hpp"
#include "mpf/lstm.hpp"
#include "mpf/sarimax.hpp"
#include "mpf/series.hpp"
#include "mpf/synthetic.hpp"
#include "mpf/vecm.hpp"

namespace mpf::pipeline {

struct SarimaxRunConfig {
    sarimax::SarimaxOrder order;
    int window = 32;
    int max_exog = 5;  // screened exogenous columns entering the 32-obs fits
    // fault-injection knob for robustness tests: every k-th window fit fails
    int inject_failure_every = 0;
};

struct VecmRunConfig {
    vecm::VecmConfig model;
};

struct CvConfig {
    bool enabled = false;
    int folds = 5;
    // candidate LSTM settings; each entry maps parameter name -> value
    std::vector<std::map<std::string, double>> space;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int workers = 1;

    // exactly one data source
    std::optional<DgpConfig> generate;
    std::optional<std::string> panel_csv;
    std::optional<std::string> catalog_csv;
    std::optional<std::string> taxonomy_path;
    bool cci_adjust = false;

    Quarter base_quarter{2007, 1};
    FeatureSpec features;  // base; the augmented variant flips `augmented`
    double train_fraction = 0.85;

    std::vector<std::string> models;  // lstm | sarimax | vecm | attention | naive | seasonal_naive
    std::vector<std::string> specs;   // base_model | fine_model
    lstm::LstmConfig lstm;
    SarimaxRunConfig sarimax;
    VecmRunConfig vecm;
    attn::AttentionConfig attention;
    CvConfig cv;

    std::vector<std::string> sections;  // empty = all CSI sections in the panel

    void validate() const;  // throws ConfigError
    std::uint64_t hash() const;
    std::string run_id() const;  // hex of hash, stable across reruns
};

RunConfig load_run_config(const std::string& path);
void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

// ---------------------------------------------------------------------------
// stages; each reads its inputs from cfg.out_dir artifacts (or the configured
// external paths) and persists its outputs there
// ---------------------------------------------------------------------------

// generate or ingest the panel; writes panel.csv, panel_meta.json and, when
// generating, ground_truth.json
void stage_data(const RunConfig& cfg);

// feature matrices per (section, spec); writes features/<section>_<spec>.csv
void stage_features(const RunConfig& cfg);

// trains/fits every configured model on the training split; persists weights
// and per-model state under models/
void stage_train(const RunConfig& cfg);

// walk-forward forecasts over the test split; writes forecasts.csv
void stage_forecast(const RunConfig& cfg);

// metrics.csv, summary_table.txt, dm_tests.csv, dm_table.txt from forecasts.csv
void stage_evaluate(const RunConfig& cfg);

// the five diagnostic csv kinds (dispersion, seasonal, acf, rollcorr, clusters)
void stage_diagnose(const RunConfig& cfg);

// all stages in order plus manifest.json and timings.json. Per-section model
// failures are recorded in the manifest and do not abort the run.
int run_pipeline(const RunConfig& cfg);

// forecast CSV schema: section,model,spec,quarter,actual,forecast,lower,upper,fallback
void save_forecasts(const std::vector<ForecastResult>& results, const std::string& path);
std::vector<ForecastResult> load_forecasts(const std::string& path);

Panel load_stage_panel(const RunConfig& cfg);  // panel.csv from out_dir

}  // namespace mpf::pipeline
