#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpf/errors.hpp"
#include "mpf/evaluation.hpp"
#include "mpf/panel_io.hpp"
#include "mpf/pipeline.hpp"
#include "mpf/preprocess.hpp"

using namespace mpf;
using namespace mpf::pipeline;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const std::string& out_dir) {
    RunConfig cfg;
    cfg.seed = 7;
    cfg.out_dir = out_dir;
    cfg.workers = 2;
    DgpConfig g;
    g.n_sections = 2;
    g.n_ppi = 2;
    g.n_macro = 1;
    g.T = 44;
    g.noise_sd = 0.02;
    g.trend_drift = 0.004;
    g.seasonal_amplitude = 0.03;
    g.driver_lead = 1;
    g.start = Quarter{2012, 1};
    cfg.generate = g;
    cfg.base_quarter = g.start;
    cfg.features.lag_set = {1, 2, 4};
    cfg.features.rolling_windows = {4};
    cfg.train_fraction = 0.85;
    cfg.models = {"sarimax", "naive"};
    cfg.specs = {"base_model", "fine_model"};
    cfg.lstm.hidden_size = 6;
    cfg.lstm.epochs = 10;
    cfg.lstm.finetune_epochs = 4;
    cfg.lstm.lookback = 4;
    cfg.sarimax.max_exog = 2;
    cfg.attention.lookback = 8;
    cfg.attention.horizon = 2;
    cfg.attention.d_model = 4;
    cfg.attention.n_heads = 1;
    cfg.attention.epochs = 20;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("pipeline reruns are byte-identical") {
    auto dir_a = fs::temp_directory_path() / "mpf_pipe_a";
    auto dir_b = fs::temp_directory_path() / "mpf_pipe_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    auto cfg_a = tiny_config(dir_a.string());
    auto cfg_b = tiny_config(dir_b.string());
    cfg_b.workers = 1;  // parallelism must not leak into the outputs

    REQUIRE(run_pipeline(cfg_a) == 0);
    REQUIRE(run_pipeline(cfg_b) == 0);

    CHECK(slurp(dir_a / "forecasts.csv") == slurp(dir_b / "forecasts.csv"));
    CHECK(slurp(dir_a / "panel.csv") == slurp(dir_b / "panel.csv"));
    CHECK(slurp(dir_a / "metrics.csv") == slurp(dir_b / "metrics.csv"));

    // the manifest embeds only deterministic fields (out_dir differs, so
    // compare a rerun into the same directory instead)
    auto manifest_first = slurp(dir_a / "manifest.json");
    REQUIRE(run_pipeline(cfg_a) == 0);
    CHECK(slurp(dir_a / "manifest.json") == manifest_first);
    CHECK(slurp(dir_a / "forecasts.csv") == slurp(dir_b / "forecasts.csv"));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("staged execution equals the fused pipeline") {
    auto dir_fused = fs::temp_directory_path() / "mpf_pipe_fused";
    auto dir_staged = fs::temp_directory_path() / "mpf_pipe_staged";
    fs::remove_all(dir_fused);
    fs::remove_all(dir_staged);

    auto cfg_f = tiny_config(dir_fused.string());
    cfg_f.models = {"lstm", "sarimax", "naive"};
    auto cfg_s = cfg_f;
    cfg_s.out_dir = dir_staged.string();

    REQUIRE(run_pipeline(cfg_f) == 0);

    stage_data(cfg_s);
    stage_features(cfg_s);
    stage_train(cfg_s);
    stage_forecast(cfg_s);
    stage_evaluate(cfg_s);

    CHECK(slurp(dir_fused / "forecasts.csv") == slurp(dir_staged / "forecasts.csv"));
    CHECK(slurp(dir_fused / "metrics.csv") == slurp(dir_staged / "metrics.csv"));

    fs::remove_all(dir_fused);
    fs::remove_all(dir_staged);
}

TEST_CASE("forecast without artifacts reports the missing path") {
    auto dir = fs::temp_directory_path() / "mpf_pipe_missing";
    fs::remove_all(dir);
    auto cfg = tiny_config(dir.string());
    CHECK_THROWS_AS(stage_forecast(cfg), MissingArtifact);

    // with the panel present but no trained models, lstm forecasting is the
    // part that must fail per-section and be recorded rather than thrown
    stage_data(cfg);
    cfg.models = {"lstm"};
    stage_forecast(cfg);
    nlohmann::json statuses;
    std::ifstream f(dir / "statuses.json");
    f >> statuses;
    for (const auto& [section, entry] : statuses.items())
        for (const auto& [model, status] : entry.items())
            CHECK(status.get<std::string>().find("failed") == 0);
    fs::remove_all(dir);
}

TEST_CASE("unknown model or spec is rejected before any computation") {
    auto cfg = tiny_config((fs::temp_directory_path() / "mpf_pipe_cfg").string());
    cfg.models = {"gradient_boosting"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.models = {"lstm"};
    cfg.specs = {"medium_model"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.specs = {"base_model"};
    cfg.generate.reset();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);  // no data source at all
}

TEST_CASE("evaluate on hand-crafted forecasts reproduces direct metrics") {
    auto dir = fs::temp_directory_path() / "mpf_pipe_eval";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ForecastResult r;
    r.section = {SeriesKind::CsiSection, "060001"};
    r.model = "naive";
    r.spec = "base_model";
    std::vector<double> actual = {100, 110, 105, 95, 120, 100, 90, 115, 108, 99};
    std::vector<double> predicted = {98, 112, 100, 97, 116, 104, 95, 110, 105, 97};
    for (size_t i = 0; i < actual.size(); ++i) {
        ForecastStep s;
        s.quarter = Quarter{2020, 1}.plus(static_cast<int>(i));
        s.actual = actual[i];
        s.forecast = predicted[i];
        r.steps.push_back(s);
    }
    save_forecasts({r}, (dir / "forecasts.csv").string());

    auto cfg = tiny_config(dir.string());
    stage_evaluate(cfg);

    auto direct = metrics(actual, predicted);
    auto text = slurp(dir / "metrics.csv");
    std::istringstream is(text);
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    auto fields = split_csv_line(row);
    REQUIRE(fields.size() >= 7);
    CHECK(std::stod(fields[4]) == doctest::Approx(direct.rmse).epsilon(1e-12));
    CHECK(std::stod(fields[5]) == doctest::Approx(direct.mape).epsilon(1e-12));
    CHECK(std::stod(fields[6]) == doctest::Approx(direct.r2).epsilon(1e-12));
    fs::remove_all(dir);
}

TEST_CASE("diagnose emits all five diagnostic file kinds") {
    auto dir = fs::temp_directory_path() / "mpf_pipe_diag";
    fs::remove_all(dir);
    auto cfg = tiny_config(dir.string());
    stage_data(cfg);
    stage_diagnose(cfg);
    std::string id = cfg.run_id();
    for (const char* kind : {"dispersion", "seasonal", "acf", "rollcorr", "clusters"}) {
        auto p = dir / ("diag_" + std::string(kind) + "_" + id + ".csv");
        INFO(p.string());
        CHECK(fs::exists(p));
        CHECK(fs::file_size(p) > 10);
    }
    fs::remove_all(dir);
}

TEST_CASE("ingest path rebases, excludes services and applies the cci") {
    auto dir = fs::temp_directory_path() / "mpf_pipe_ingest";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // hand-built input panel: two sections, one cci
    {
        std::ofstream f(dir / "input.csv");
        f << "kind,code,quarter,value\n";
        for (int t = 0; t < 8; ++t) {
            Quarter q = Quarter{2020, 1}.plus(t);
            f << "csi,061100," << q.str() << ',' << 200.0 + 10 * t << '\n';
            f << "csi,031000," << q.str() << ',' << 300.0 + 5 * t << '\n';
            f << "cci,sanjose," << q.str() << ",125\n";
        }
    }
    {
        std::ofstream f(dir / "catalog.csv");
        f << "division,section,title,description\n";
        f << "06,061100,Wood framing,structural lumber\n";
        f << "03,031000,Concrete forms,crew mobilization and forms\n";
    }
    {
        std::ofstream f(dir / "keywords.txt");
        f << "mobilization\n";
    }

    RunConfig cfg;
    cfg.seed = 1;
    cfg.out_dir = dir.string();
    cfg.panel_csv = (dir / "input.csv").string();
    cfg.catalog_csv = (dir / "catalog.csv").string();
    cfg.taxonomy_path = (dir / "keywords.txt").string();
    cfg.cci_adjust = true;
    cfg.base_quarter = Quarter{2020, 1};
    cfg.models = {"naive"};
    cfg.specs = {"base_model"};
    stage_data(cfg);

    auto panel = load_panel((dir / "panel.csv").string());
    CHECK(panel.has({SeriesKind::CsiSection, "061100"}));
    CHECK_FALSE(panel.has({SeriesKind::CsiSection, "031000"}));  // mobilization keyword

    // cci first (divide by 1.25), then rebase to 100: relative path unchanged
    const auto& s = panel.get({SeriesKind::CsiSection, "061100"});
    CHECK(s.values[0] == doctest::Approx(100.0));
    CHECK(s.values[1] == doctest::Approx(100.0 * 210.0 / 200.0));

    auto meta = load_panel_meta(meta_sidecar_path((dir / "panel.csv").string()));
    REQUIRE(meta.has_value());
    CHECK(meta->cci_adjusted);
    CHECK(meta->excluded_rows == 1);
    fs::remove_all(dir);
}

TEST_CASE("run config json round-trips through load") {
    auto dir = fs::temp_directory_path() / "mpf_pipe_json";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto cfg = tiny_config((dir / "out").string());
    nlohmann::json j;
    to_json(j, cfg);
    {
        std::ofstream f(dir / "run.json");
        f << j.dump(2);
    }
    auto back = load_run_config((dir / "run.json").string());
    CHECK(back.hash() == cfg.hash());
    CHECK(back.models == cfg.models);
    CHECK(back.train_fraction == cfg.train_fraction);
    fs::remove_all(dir);
}

TEST_CASE("cv grid search stage runs and applies the winner") {
    auto dir = fs::temp_directory_path() / "mpf_pipe_cv";
    fs::remove_all(dir);
    auto cfg = tiny_config(dir.string());
    cfg.models = {"lstm"};
    cfg.specs = {"base_model"};
    cfg.cv.enabled = true;
    cfg.cv.folds = 4;
    cfg.cv.space = {{{"hidden_size", 4}, {"epochs", 8}}, {{"hidden_size", 6}, {"epochs", 8}}};
    stage_data(cfg);
    stage_train(cfg);
    CHECK(fs::exists(dir / "cv_results.csv"));
    CHECK(fs::exists(dir / "cv_best.json"));
    auto text = slurp(dir / "cv_results.csv");
    // header + |space| * folds rows
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 4);
    fs::remove_all(dir);
}
