#include "mpf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mpf/diagnostics.hpp"
#include "mpf/errors.hpp"
#include "mpf/evaluation.hpp"
#include "mpf/panel_io.hpp"
#include "mpf/pca.hpp"
#include "mpf/preprocess.hpp"
#include "mpf/stats.hpp"

namespace fs = std::filesystem;

namespace mpf::pipeline {

namespace {

constexpr const char* kCodeVersion = "0.1.0";

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t task_seed(std::uint64_t base, const std::string& model, const std::string& section,
                        const std::string& spec) {
    return base ^ fnv1a(model + "/" + section + "/" + spec);
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::string> errors(static_cast<size_t>(n));
    std::vector<std::thread> pool;
    int k = std::min(workers, n);
    for (int w = 0; w < k; ++w) {
        pool.emplace_back([&] {
            int i;
            while ((i = next.fetch_add(1)) < n) {
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    errors[static_cast<size_t>(i)] = e.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (!e.empty()) throw Error(e);  // first failure wins; tasks record their own statuses
}

fs::path out_path(const RunConfig& cfg, const std::string& name) {
    return fs::path(cfg.out_dir) / name;
}

void ensure_dir(const fs::path& p) { fs::create_directories(p); }

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw DataError("cannot write " + tmp.string());
        f << text;
    }
    fs::rename(tmp, path);
}

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd json_to_mat(const nlohmann::json& j) {
    if (j.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(j.size(), j[0].size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j2 = 0; j2 < m.cols(); ++j2)
            m(i, j2) = j[static_cast<size_t>(i)][static_cast<size_t>(j2)].get<double>();
    return m;
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd json_to_vec(const nlohmann::json& j) {
    Eigen::VectorXd v(j.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<size_t>(i)].get<double>();
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    int sources = (generate ? 1 : 0) + (panel_csv ? 1 : 0);
    if (sources != 1) throw ConfigError("exactly one of data.generate / data.panel_csv required");
    if (generate) generate->validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split must be in (0, 1)");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    static const std::set<std::string> known_models = {"lstm",      "sarimax",
                                                       "vecm",      "attention",
                                                       "naive",     "seasonal_naive"};
    if (models.empty()) throw ConfigError("no models configured");
    for (const auto& m : models)
        if (!known_models.count(m)) throw ConfigError("unknown model '" + m + "'");
    static const std::set<std::string> known_specs = {"base_model", "fine_model"};
    if (specs.empty()) throw ConfigError("no model specs configured");
    for (const auto& s : specs)
        if (!known_specs.count(s)) throw ConfigError("unknown spec '" + s + "'");
    lstm.validate();
    attention.validate();
    if (cv.enabled && cv.space.empty()) throw ConfigError("cv enabled with an empty space");
}

std::uint64_t RunConfig::hash() const {
    nlohmann::json j;
    to_json(j, *this);
    // run-environment knobs do not change the logical run: the same config
    // in another directory or thread count produces identical artifacts
    j.erase("out_dir");
    j.erase("workers");
    return fnv1a(j.dump());
}

std::string RunConfig::run_id() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

void to_json(nlohmann::json& j, const RunConfig& cfg) {
    j = nlohmann::json::object();
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["workers"] = cfg.workers;
    nlohmann::json data = nlohmann::json::object();
    if (cfg.generate) {
        nlohmann::json g;
        mpf::to_json(g, *cfg.generate);
        data["generate"] = g;
    }
    if (cfg.panel_csv) data["panel_csv"] = *cfg.panel_csv;
    if (cfg.catalog_csv) data["catalog_csv"] = *cfg.catalog_csv;
    if (cfg.taxonomy_path) data["taxonomy"] = *cfg.taxonomy_path;
    data["cci_adjust"] = cfg.cci_adjust;
    j["data"] = data;
    j["base_quarter"] = cfg.base_quarter.str();
    nlohmann::json feats;
    mpf::to_json(feats, cfg.features);
    j["features"] = feats;
    j["split"] = cfg.train_fraction;
    j["models"] = cfg.models;
    j["specs"] = cfg.specs;
    j["lstm"] = {{"hidden_size", cfg.lstm.hidden_size}, {"dropout", cfg.lstm.dropout},
                 {"lookback", cfg.lstm.lookback},       {"epochs", cfg.lstm.epochs},
                 {"finetune_epochs", cfg.lstm.finetune_epochs},
                 {"learning_rate", cfg.lstm.learning_rate},
                 {"weight_decay", cfg.lstm.weight_decay}};
    j["sarimax"] = {{"order",
                     {cfg.sarimax.order.p, cfg.sarimax.order.d, cfg.sarimax.order.q,
                      cfg.sarimax.order.P, cfg.sarimax.order.D, cfg.sarimax.order.Q,
                      cfg.sarimax.order.s}},
                    {"window", cfg.sarimax.window},
                    {"max_exog", cfg.sarimax.max_exog},
                    {"inject_failure_every", cfg.sarimax.inject_failure_every}};
    j["vecm"] = {{"n_components", cfg.vecm.model.n_components},
                 {"horizon", cfg.vecm.model.horizon},
                 {"seasonal_indicator", cfg.vecm.model.seasonal_indicator}};
    j["attention"] = {{"lookback", cfg.attention.lookback},
                      {"horizon", cfg.attention.horizon},
                      {"d_model", cfg.attention.d_model},
                      {"n_heads", cfg.attention.n_heads},
                      {"alpha", cfg.attention.alpha},
                      {"epochs", cfg.attention.epochs},
                      {"learning_rate", cfg.attention.learning_rate},
                      {"weight_decay", cfg.attention.weight_decay}};
    j["cv"] = {{"enabled", cfg.cv.enabled}, {"folds", cfg.cv.folds}, {"space", cfg.cv.space}};
    j["sections"] = cfg.sections;
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
    cfg = RunConfig{};
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("data")) {
        const auto& d = j["data"];
        if (d.contains("generate")) {
            DgpConfig g;
            mpf::from_json(d["generate"], g);
            cfg.generate = g;
        }
        if (d.contains("panel_csv")) cfg.panel_csv = d["panel_csv"].get<std::string>();
        if (d.contains("catalog_csv")) cfg.catalog_csv = d["catalog_csv"].get<std::string>();
        if (d.contains("taxonomy")) cfg.taxonomy_path = d["taxonomy"].get<std::string>();
        cfg.cci_adjust = d.value("cci_adjust", false);
    }
    if (j.contains("base_quarter"))
        cfg.base_quarter = parse_quarter(j["base_quarter"].get<std::string>());
    if (j.contains("features")) mpf::from_json(j["features"], cfg.features);
    cfg.train_fraction = j.value("split", cfg.train_fraction);
    if (j.contains("models")) cfg.models = j["models"].get<std::vector<std::string>>();
    if (j.contains("specs")) cfg.specs = j["specs"].get<std::vector<std::string>>();
    if (j.contains("lstm")) {
        const auto& l = j["lstm"];
        cfg.lstm.hidden_size = l.value("hidden_size", cfg.lstm.hidden_size);
        cfg.lstm.dropout = l.value("dropout", cfg.lstm.dropout);
        cfg.lstm.lookback = l.value("lookback", cfg.lstm.lookback);
        cfg.lstm.epochs = l.value("epochs", cfg.lstm.epochs);
        cfg.lstm.finetune_epochs = l.value("finetune_epochs", cfg.lstm.finetune_epochs);
        cfg.lstm.learning_rate = l.value("learning_rate", cfg.lstm.learning_rate);
        cfg.lstm.weight_decay = l.value("weight_decay", cfg.lstm.weight_decay);
    }
    if (j.contains("sarimax")) {
        const auto& s = j["sarimax"];
        if (s.contains("order")) {
            auto o = s["order"].get<std::vector<int>>();
            if (o.size() != 7) throw ConfigError("sarimax.order must be [p,d,q,P,D,Q,s]");
            cfg.sarimax.order = {o[0], o[1], o[2], o[3], o[4], o[5], o[6]};
        }
        cfg.sarimax.window = s.value("window", cfg.sarimax.window);
        cfg.sarimax.max_exog = s.value("max_exog", cfg.sarimax.max_exog);
        cfg.sarimax.inject_failure_every =
            s.value("inject_failure_every", cfg.sarimax.inject_failure_every);
    }
    if (j.contains("vecm")) {
        const auto& v = j["vecm"];
        cfg.vecm.model.n_components = v.value("n_components", cfg.vecm.model.n_components);
        cfg.vecm.model.horizon = v.value("horizon", cfg.vecm.model.horizon);
        cfg.vecm.model.seasonal_indicator =
            v.value("seasonal_indicator", cfg.vecm.model.seasonal_indicator);
    }
    if (j.contains("attention")) {
        const auto& a = j["attention"];
        cfg.attention.lookback = a.value("lookback", cfg.attention.lookback);
        cfg.attention.horizon = a.value("horizon", cfg.attention.horizon);
        cfg.attention.d_model = a.value("d_model", cfg.attention.d_model);
        cfg.attention.n_heads = a.value("n_heads", cfg.attention.n_heads);
        cfg.attention.alpha = a.value("alpha", cfg.attention.alpha);
        cfg.attention.epochs = a.value("epochs", cfg.attention.epochs);
        cfg.attention.learning_rate = a.value("learning_rate", cfg.attention.learning_rate);
        cfg.attention.weight_decay = a.value("weight_decay", cfg.attention.weight_decay);
    }
    if (j.contains("cv")) {
        const auto& c = j["cv"];
        cfg.cv.enabled = c.value("enabled", false);
        cfg.cv.folds = c.value("folds", 5);
        if (c.contains("space"))
            cfg.cv.space = c["space"].get<std::vector<std::map<std::string, double>>>();
    }
    if (j.contains("sections")) cfg.sections = j["sections"].get<std::vector<std::string>>();
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    try {
        from_json(j, cfg);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config structure error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// shared stage helpers
// ---------------------------------------------------------------------------

Panel load_stage_panel(const RunConfig& cfg) {
    auto path = out_path(cfg, "panel.csv");
    if (!fs::exists(path)) throw MissingArtifact("expected " + path.string() + "; run the data stage first");
    return load_panel(path.string());
}

namespace {

struct ResolvedSpecs {
    FeatureSpec base;
    FeatureSpec fine;
};

ResolvedSpecs resolve_specs(const RunConfig& cfg, const Panel& panel) {
    ResolvedSpecs out;
    out.base = cfg.features;
    out.base.augmented = false;
    out.fine = cfg.features;
    out.fine.augmented = true;
    if (out.fine.ppi_clusters.empty()) {
        PpiCluster all{"ppi_all", {}};
        for (const auto& key : panel.keys_of(SeriesKind::Ppi)) all.members.push_back(key);
        if (!all.members.empty()) out.fine.ppi_clusters.push_back(std::move(all));
    }
    if (out.fine.macro_keys.empty()) out.fine.macro_keys = panel.keys_of(SeriesKind::Macro);
    return out;
}

const FeatureSpec& spec_for(const ResolvedSpecs& rs, const std::string& name) {
    return name == "fine_model" ? rs.fine : rs.base;
}

std::vector<SeriesKey> resolve_sections(const RunConfig& cfg, const Panel& panel) {
    auto all = panel.keys_of(SeriesKind::CsiSection);
    if (cfg.sections.empty()) return all;
    std::vector<SeriesKey> out;
    for (const auto& code : cfg.sections) {
        SeriesKey key{SeriesKind::CsiSection, code};
        if (std::find(all.begin(), all.end(), key) == all.end())
            throw ConfigError("configured section " + code + " not present after preprocessing");
        out.push_back(key);
    }
    return out;
}

Quarter train_end_of(const RunConfig& cfg, const Panel& panel) {
    size_t n_train =
        static_cast<size_t>(std::floor(static_cast<double>(panel.length()) * cfg.train_fraction));
    if (n_train == 0 || n_train >= panel.length()) throw TooShort("split leaves an empty block");
    return panel.quarters()[n_train - 1];
}

std::string model_file(const RunConfig& cfg, const std::string& kind, const std::string& section,
                       const std::string& spec, const std::string& ext) {
    return (out_path(cfg, "models") / (kind + "_" + section + "_" + spec + ext)).string();
}

// top-`max_exog` exogenous columns for the 32-observation fits
std::vector<std::string> sarimax_exog_columns(const FeatureMatrix& train_matrix, int max_exog) {
    return select_exog_by_diff_correlation(train_matrix, max_exog);
}

// exogenous matrix for the sarimax walk-forward: the row for quarter q holds
// the screened feature values as of q-1
sarimax::AlignedExog shifted_exog(const FeatureMatrix& matrix,
                                  const std::vector<std::string>& columns) {
    auto sub = matrix.subset(columns);
    sarimax::AlignedExog exog;
    if (sub.rows.empty()) return exog;
    exog.start = sub.rows.front().quarter.next();
    exog.rows.resize(static_cast<Eigen::Index>(sub.rows.size()),
                     static_cast<Eigen::Index>(columns.size()));
    for (size_t i = 0; i < sub.rows.size(); ++i)
        for (size_t j = 0; j < columns.size(); ++j)
            exog.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                sub.rows[i].x[j];
    return exog;
}

// exogenous level block (log-space when configured) for the vecm pca input
Eigen::MatrixXd exog_level_block(const Panel& panel, const FeatureSpec& spec) {
    std::vector<const Series*> series;
    for (const auto& key : panel.keys_of(SeriesKind::Ppi)) series.push_back(&panel.get(key));
    for (const auto& key : panel.keys_of(SeriesKind::Macro)) series.push_back(&panel.get(key));
    Eigen::MatrixXd block(panel.length(), series.size());
    for (size_t j = 0; j < series.size(); ++j) {
        Series s = *series[j];
        impute_locf(s, spec.impute_cap);
        if (spec.use_log) s = log_transform(s);
        for (size_t t = 0; t < panel.length(); ++t)
            block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = s.values[t];
    }
    return block;
}

struct VecmArtifact {
    std::vector<Quarter> quarters;
    std::vector<double> path;  // target levels
    nlohmann::json diagnostics;
};

VecmArtifact fit_vecm_for_section(const RunConfig& cfg, const Panel& panel,
                                  const SeriesKey& section, const FeatureSpec& spec,
                                  const Quarter& train_end) {
    Panel train = panel.truncated_after(train_end);
    Series target = train.get(section);
    impute_locf(target, spec.impute_cap);
    bool logged = spec.use_log;
    if (logged) target = log_transform(target);

    Eigen::MatrixXd scores(train.length(), 0);
    vecm::VecmConfig vc = cfg.vecm.model;
    if (spec.augmented) {
        Eigen::MatrixXd block = exog_level_block(train, spec);
        int k = std::min<int>(vc.n_components, static_cast<int>(block.cols()));
        auto model = pca::pca_fit(block, k);
        scores = pca::pca_transform(model, block);
    }

    auto params = vecm::johansen_fit(target, scores, vc);

    Eigen::MatrixXd Y(train.length(), 1 + scores.cols());
    std::vector<Quarter> axis;
    for (size_t t = 0; t < train.length(); ++t) {
        Y(static_cast<Eigen::Index>(t), 0) = target.values[t];
        for (Eigen::Index j = 0; j < scores.cols(); ++j)
            Y(static_cast<Eigen::Index>(t), 1 + j) = scores(static_cast<Eigen::Index>(t), j);
        axis.push_back(train.quarters()[t]);
    }
    auto state = vecm::last_state(Y, axis);
    auto path = vecm::vecm_forecast(params, state, vc.horizon);

    VecmArtifact art;
    for (int h = 0; h < vc.horizon; ++h) {
        double v = path(h, 0);
        art.path.push_back(logged ? std::exp(v) : v);  // inverse transform to levels
        art.quarters.push_back(train_end.plus(h + 1));
    }
    art.diagnostics["eigenvalues"] = params.eigenvalues;
    art.diagnostics["beta_coint"] = vec_to_json(params.beta_coint);
    art.diagnostics["alpha"] = vec_to_json(params.alpha);
    return art;
}

nlohmann::json attention_to_json(const attn::AttentionModel& model) {
    nlohmann::json j;
    j["config"] = {{"lookback", model.config.lookback},
                   {"horizon", model.config.horizon},
                   {"d_model", model.config.d_model},
                   {"n_heads", model.config.n_heads},
                   {"alpha", model.config.alpha},
                   {"epochs", model.config.epochs},
                   {"learning_rate", model.config.learning_rate},
                   {"weight_decay", model.config.weight_decay},
                   {"seed", model.config.seed},
                   {"positional_encoding", model.config.positional_encoding},
                   {"input_size", model.weights.input_size}};
    j["scaler"] = {{"mean", vec_to_json(model.scaler.mean)}, {"sd", vec_to_json(model.scaler.sd)}};
    j["columns"] = model.columns;
    nlohmann::json w;
    w["W_embed"] = mat_to_json(model.weights.W_embed);
    w["b_embed"] = vec_to_json(model.weights.b_embed);
    for (size_t h = 0; h < model.weights.W_q.size(); ++h) {
        w["W_q"].push_back(mat_to_json(model.weights.W_q[h]));
        w["W_k"].push_back(mat_to_json(model.weights.W_k[h]));
        w["W_v"].push_back(mat_to_json(model.weights.W_v[h]));
    }
    w["W_o"] = mat_to_json(model.weights.W_o);
    w["b_o"] = vec_to_json(model.weights.b_o);
    w["W_ff1"] = mat_to_json(model.weights.W_ff1);
    w["b_ff1"] = vec_to_json(model.weights.b_ff1);
    w["W_ff2"] = mat_to_json(model.weights.W_ff2);
    w["b_ff2"] = vec_to_json(model.weights.b_ff2);
    w["W_mu"] = mat_to_json(model.weights.W_mu);
    w["b_mu"] = vec_to_json(model.weights.b_mu);
    w["W_ls"] = mat_to_json(model.weights.W_ls);
    w["b_ls"] = vec_to_json(model.weights.b_ls);
    j["weights"] = w;
    return j;
}

attn::AttentionModel attention_from_json(const nlohmann::json& j) {
    attn::AttentionModel model;
    const auto& c = j.at("config");
    model.config.lookback = c.at("lookback").get<int>();
    model.config.horizon = c.at("horizon").get<int>();
    model.config.d_model = c.at("d_model").get<int>();
    model.config.n_heads = c.at("n_heads").get<int>();
    model.config.alpha = c.at("alpha").get<double>();
    model.config.epochs = c.at("epochs").get<int>();
    model.config.learning_rate = c.at("learning_rate").get<double>();
    model.config.weight_decay = c.at("weight_decay").get<double>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.config.positional_encoding = c.at("positional_encoding").get<bool>();
    int input = c.at("input_size").get<int>();
    model.scaler.mean = json_to_vec(j.at("scaler").at("mean"));
    model.scaler.sd = json_to_vec(j.at("scaler").at("sd"));
    if (j.contains("columns")) model.columns = j["columns"].get<std::vector<std::string>>();
    model.weights = attn::AttentionWeights::zeros(model.config, input);
    const auto& w = j.at("weights");
    model.weights.W_embed = json_to_mat(w.at("W_embed"));
    model.weights.b_embed = json_to_vec(w.at("b_embed"));
    for (int h = 0; h < model.config.n_heads; ++h) {
        model.weights.W_q[static_cast<size_t>(h)] = json_to_mat(w.at("W_q")[static_cast<size_t>(h)]);
        model.weights.W_k[static_cast<size_t>(h)] = json_to_mat(w.at("W_k")[static_cast<size_t>(h)]);
        model.weights.W_v[static_cast<size_t>(h)] = json_to_mat(w.at("W_v")[static_cast<size_t>(h)]);
    }
    model.weights.W_o = json_to_mat(w.at("W_o"));
    model.weights.b_o = json_to_vec(w.at("b_o"));
    model.weights.W_ff1 = json_to_mat(w.at("W_ff1"));
    model.weights.b_ff1 = json_to_vec(w.at("b_ff1"));
    model.weights.W_ff2 = json_to_mat(w.at("W_ff2"));
    model.weights.b_ff2 = json_to_vec(w.at("b_ff2"));
    model.weights.W_mu = json_to_mat(w.at("W_mu"));
    model.weights.b_mu = json_to_vec(w.at("b_mu"));
    model.weights.W_ls = json_to_mat(w.at("W_ls"));
    model.weights.b_ls = json_to_vec(w.at("b_ls"));
    return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

void stage_data(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    PanelMeta meta;
    meta.base = cfg.base_quarter;

    Panel panel;
    if (cfg.generate) {
        DgpConfig g = *cfg.generate;
        g.seed = cfg.seed;  // the run seed governs generation
        auto gen = generate_panel(g);
        panel = std::move(gen.panel);
        meta.base = g.start;
        nlohmann::json truth;
        mpf::to_json(truth, gen.truth);
        write_text_atomic(out_path(cfg, "ground_truth.json"), truth.dump(2) + "\n");
    } else {
        panel = load_panel(*cfg.panel_csv);

        // catalog-driven service exclusion
        if (cfg.catalog_csv) {
            auto rows = load_catalog(*cfg.catalog_csv);
            std::vector<std::string> taxonomy = {"mobilization", "project management",
                                                 "temporary facilities", "permits/fees",
                                                 "bonding", "testing/inspection",
                                                 "documentation", "submittals"};
            if (cfg.taxonomy_path) taxonomy = load_taxonomy(*cfg.taxonomy_path);
            auto kept = exclude_services(rows, taxonomy);
            std::set<std::string> material_sections;
            for (const auto& r : kept) material_sections.insert(r.section);
            std::vector<Series> filtered;
            for (const auto& s : panel.series()) {
                if (s.key.is_csi() && !material_sections.count(s.key.code)) continue;
                filtered.push_back(s);
            }
            meta.excluded_rows = static_cast<int>(rows.size() - kept.size());
            meta.kept_rows = static_cast<int>(kept.size());
            panel = Panel::build(std::move(filtered));
        }

        // optional CCI normalization of the CSI sections
        auto cci_keys = panel.keys_of(SeriesKind::CityCostIndex);
        if (cfg.cci_adjust && !cci_keys.empty()) {
            const Series cci = panel.get(cci_keys.front());
            for (const auto& key : panel.keys_of(SeriesKind::CsiSection))
                panel = panel.with_series(cci_adjust(panel.get(key), cci));
            meta.cci_adjusted = true;
        }

        // rebase everything to the configured base quarter
        std::vector<Series> rebased;
        for (const auto& s : panel.series()) {
            if (s.key.kind == SeriesKind::CityCostIndex) {
                rebased.push_back(s);
                continue;
            }
            rebased.push_back(rebase(s, cfg.base_quarter, 100.0));
        }
        panel = Panel::build(std::move(rebased));
        panel.base = cfg.base_quarter;
    }

    save_panel(panel, out_path(cfg, "panel.csv").string());
    save_panel_meta(meta, meta_sidecar_path(out_path(cfg, "panel.csv").string()));
}

void stage_features(const RunConfig& cfg) {
    Panel panel = load_stage_panel(cfg);
    auto specs = resolve_specs(cfg, panel);
    auto sections = resolve_sections(cfg, panel);
    ensure_dir(out_path(cfg, "features"));

    parallel_for(static_cast<int>(sections.size()), cfg.workers, [&](int i) {
        const auto& key = sections[static_cast<size_t>(i)];
        for (const auto& spec_name : cfg.specs) {
            auto m = build_matrix(panel, key, spec_for(specs, spec_name), panel.last_quarter());
            m.save_csv((out_path(cfg, "features") / (key.code + "_" + spec_name + ".csv")).string());
        }
    });
}

namespace {

struct CvOutcome {
    lstm::LstmConfig tuned;
    std::string results_csv;
};

// 5-fold stratified grid search over the lstm space; scores are next-quarter
// RMSEs on held-out label rows
CvOutcome run_cv(const RunConfig& cfg, const Panel& panel, const ResolvedSpecs& specs,
                 const std::vector<SeriesKey>& sections, const Quarter& train_end) {
    CvOutcome out;
    out.tuned = cfg.lstm;
    const auto& key = sections.front();  // tuning on the first section, applied to all
    auto matrix = build_matrix(panel, key, spec_for(specs, cfg.specs.front()), train_end);

    std::vector<Quarter> row_quarters;
    for (const auto& row : matrix.rows) row_quarters.push_back(row.quarter);
    auto plan = stratified_cv(row_quarters, cfg.cv.folds, cfg.seed);

    std::vector<GridCandidate> space;
    for (const auto& params : cfg.cv.space) space.push_back(GridCandidate{params});

    auto fold_rmse = [&](const GridCandidate& cand, const std::vector<size_t>& train_rows,
                         const std::vector<size_t>& valid_rows) {
        lstm::LstmConfig lc = cfg.lstm;
        auto get = [&](const char* name, double dflt) {
            auto it = cand.params.find(name);
            return it != cand.params.end() ? it->second : dflt;
        };
        lc.hidden_size = static_cast<int>(get("hidden_size", lc.hidden_size));
        lc.learning_rate = get("learning_rate", lc.learning_rate);
        lc.weight_decay = get("weight_decay", lc.weight_decay);
        lc.dropout = get("dropout", lc.dropout);
        lc.epochs = static_cast<int>(get("epochs", lc.epochs));
        lc.seed = cfg.seed;

        lstm::TrainingState st;
        try {
            st = lstm::train_on_labels(matrix, lc, train_rows);
        } catch (const Error&) {
            return 1e9;  // unusable candidate
        }
        double sse = 0.0;
        int n = 0;
        for (size_t v : valid_rows) {
            if (v == 0) continue;
            try {
                double pred = lstm::predict_next(st, matrix, matrix.rows[v - 1].quarter);
                double err = matrix.rows[v].target - pred;
                sse += err * err;
                ++n;
            } catch (const Error&) {
            }
        }
        return n > 0 ? std::sqrt(sse / n) : 1e9;
    };

    auto res = grid_search(space, plan, fold_rmse);

    std::ostringstream csv;
    csv << "candidate,fold,rmse\n";
    for (const auto& row : res.table)
        csv << csv_quote(row.candidate) << ',' << row.fold << ',' << format_double(row.rmse)
            << '\n';
    out.results_csv = csv.str();

    auto get = [&](const char* name, double dflt) {
        auto it = res.best.params.find(name);
        return it != res.best.params.end() ? it->second : dflt;
    };
    out.tuned.hidden_size = static_cast<int>(get("hidden_size", out.tuned.hidden_size));
    out.tuned.learning_rate = get("learning_rate", out.tuned.learning_rate);
    out.tuned.weight_decay = get("weight_decay", out.tuned.weight_decay);
    out.tuned.dropout = get("dropout", out.tuned.dropout);
    out.tuned.epochs = static_cast<int>(get("epochs", out.tuned.epochs));
    return out;
}

}  // namespace

void stage_train(const RunConfig& cfg) {
    Panel panel = load_stage_panel(cfg);
    auto specs = resolve_specs(cfg, panel);
    auto sections = resolve_sections(cfg, panel);
    Quarter train_end = train_end_of(cfg, panel);
    ensure_dir(out_path(cfg, "models"));

    bool want_lstm = std::count(cfg.models.begin(), cfg.models.end(), "lstm") > 0;
    bool want_attn = std::count(cfg.models.begin(), cfg.models.end(), "attention") > 0;
    bool want_vecm = std::count(cfg.models.begin(), cfg.models.end(), "vecm") > 0;
    bool want_sarimax = std::count(cfg.models.begin(), cfg.models.end(), "sarimax") > 0;

    lstm::LstmConfig lstm_cfg = cfg.lstm;
    if (cfg.cv.enabled && want_lstm) {
        auto cv = run_cv(cfg, panel, specs, sections, train_end);
        write_text_atomic(out_path(cfg, "cv_results.csv"), cv.results_csv);
        lstm_cfg = cv.tuned;
        nlohmann::json best = {{"hidden_size", lstm_cfg.hidden_size},
                               {"learning_rate", lstm_cfg.learning_rate},
                               {"weight_decay", lstm_cfg.weight_decay},
                               {"dropout", lstm_cfg.dropout},
                               {"epochs", lstm_cfg.epochs}};
        write_text_atomic(out_path(cfg, "cv_best.json"), best.dump(2) + "\n");
    }

    parallel_for(static_cast<int>(sections.size()), cfg.workers, [&](int i) {
        const auto& key = sections[static_cast<size_t>(i)];
        for (const auto& spec_name : cfg.specs) {
            const auto& fspec = spec_for(specs, spec_name);
            auto matrix = build_matrix(panel, key, fspec, train_end);

            if (want_lstm) {
                auto lc = lstm_cfg;
                lc.seed = task_seed(cfg.seed, "lstm", key.code, spec_name);
                auto st = lstm::train(matrix, lc);
                lstm::save_weights(st, model_file(cfg, "lstm", key.code, spec_name, ".bin"));
                std::ostringstream loss;
                loss << "epoch,loss\n";
                for (size_t e = 0; e < st.loss_curve.size(); ++e)
                    loss << e << ',' << format_double(st.loss_curve[e]) << '\n';
                write_text_atomic(model_file(cfg, "lstm_loss", key.code, spec_name, ".csv"),
                                  loss.str());
            }
            if (want_attn) {
                auto ac = cfg.attention;
                ac.seed = task_seed(cfg.seed, "attention", key.code, spec_name);
                auto model = attn::train_gaussian_nll(matrix, ac);
                write_text_atomic(model_file(cfg, "attention", key.code, spec_name, ".json"),
                                  attention_to_json(model).dump() + "\n");
            }
            if (want_vecm) {
                auto art = fit_vecm_for_section(cfg, panel, key, fspec, train_end);
                nlohmann::json j;
                j["diagnostics"] = art.diagnostics;
                nlohmann::json path = nlohmann::json::array();
                for (size_t h = 0; h < art.path.size(); ++h)
                    path.push_back({{"quarter", art.quarters[h].str()}, {"level", art.path[h]}});
                j["path"] = path;
                write_text_atomic(model_file(cfg, "vecm", key.code, spec_name, ".json"),
                                  j.dump(2) + "\n");
            }
            if (want_sarimax && spec_name == "fine_model") {
                auto cols = sarimax_exog_columns(matrix, cfg.sarimax.max_exog);
                nlohmann::json j = {{"columns", cols}};
                write_text_atomic(model_file(cfg, "sarimax_cols", key.code, spec_name, ".json"),
                                  j.dump(2) + "\n");
            }
        }
    });
}

namespace {

struct SectionForecasts {
    std::vector<ForecastResult> results;
    std::map<std::string, std::string> statuses;  // "model/spec" -> status
};

SectionForecasts forecast_section(const RunConfig& cfg, const Panel& panel,
                                  const ResolvedSpecs& specs, const SeriesKey& key,
                                  const Quarter& train_end, const Quarter& test_end) {
    SectionForecasts out;
    Quarter test_start = train_end.next();
    const Series& actual_series = panel.get(key);

    auto status_of = [](const ForecastResult& r) {
        int fb = r.fallback_count();
        return fb == 0 ? std::string("ok") : "fallback:" + std::to_string(fb);
    };

    for (const auto& model : cfg.models) {
        for (const auto& spec_name : cfg.specs) {
            // the baselines and pure sarima carry no fine variant
            bool base_only = model == "naive" || model == "seasonal_naive";
            if (base_only && spec_name != "base_model") continue;

            std::string status_key = model + "/" + spec_name;
            try {
                const auto& fspec = spec_for(specs, spec_name);
                ForecastResult result;
                if (model == "naive") {
                    result = naive_persistence(actual_series, test_start, test_end);
                } else if (model == "seasonal_naive") {
                    result = seasonal_naive(actual_series, test_start, test_end, 4);
                } else if (model == "lstm") {
                    auto st = lstm::load_weights(
                        model_file(cfg, "lstm", key.code, spec_name, ".bin"));
                    result = lstm::walk_forward_predict(st, panel, key, fspec, test_start,
                                                        test_end);
                    result.spec = spec_name;
                } else if (model == "attention") {
                    std::string path = model_file(cfg, "attention", key.code, spec_name, ".json");
                    std::ifstream f(path);
                    if (!f) throw MissingArtifact("expected " + path + "; run the train stage");
                    nlohmann::json j;
                    f >> j;
                    auto am = attention_from_json(j);
                    result = attn::walk_forward_predict(am, panel, key, fspec, test_start,
                                                        test_end);
                    result.spec = spec_name;
                } else if (model == "vecm") {
                    std::string path = model_file(cfg, "vecm", key.code, spec_name, ".json");
                    std::ifstream f(path);
                    if (!f) throw MissingArtifact("expected " + path + "; run the train stage");
                    nlohmann::json j;
                    f >> j;
                    result.section = key;
                    result.model = "vecm";
                    result.spec = spec_name;
                    std::map<std::string, double> by_quarter;
                    for (const auto& p : j["path"])
                        by_quarter[p["quarter"].get<std::string>()] = p["level"].get<double>();
                    for (Quarter q = test_start; q <= test_end; q = q.next()) {
                        ForecastStep step;
                        step.quarter = q;
                        auto ai = actual_series.index_of(q);
                        if (ai && actual_series.observed[*ai]) step.actual = actual_series.values[*ai];
                        auto it = by_quarter.find(q.str());
                        if (it != by_quarter.end()) {
                            step.forecast = it->second;
                        } else {
                            // beyond the fitted horizon; persistence, flagged
                            auto pi = actual_series.index_of(q.prev());
                            step.forecast = pi ? actual_series.values[*pi]
                                               : std::numeric_limits<double>::quiet_NaN();
                            step.fallback = true;
                        }
                        result.steps.push_back(step);
                    }
                } else if (model == "sarimax") {
                    sarimax::RollingConfig rc;
                    rc.window = cfg.sarimax.window;
                    sarimax::WalkForwardOptions wf_opts;
                    wf_opts.inject_failure_every = cfg.sarimax.inject_failure_every;
                    if (spec_name == "fine_model") {
                        std::string path =
                            model_file(cfg, "sarimax_cols", key.code, spec_name, ".json");
                        std::ifstream f(path);
                        if (!f) throw MissingArtifact("expected " + path + "; run the train stage");
                        nlohmann::json j;
                        f >> j;
                        auto cols = j["columns"].get<std::vector<std::string>>();
                        FeatureSpec raw = specs.fine;
                        raw.screening.reset();  // frozen columns, not re-screened
                        auto matrix = build_matrix(panel, key, raw, panel.last_quarter());
                        auto exog = shifted_exog(matrix, cols);
                        result = sarimax::rolling_walk_forward(actual_series, &exog,
                                                               cfg.sarimax.order, rc, test_start,
                                                               test_end, wf_opts);
                    } else {
                        result = sarimax::rolling_walk_forward(actual_series, nullptr,
                                                               cfg.sarimax.order, rc, test_start,
                                                               test_end, wf_opts);
                    }
                    result.spec = spec_name;
                }
                out.statuses[status_key] = status_of(result);
                out.results.push_back(std::move(result));
            } catch (const Error& e) {
                out.statuses[status_key] = std::string("failed: ") + e.what();
            }
        }
    }
    return out;
}

}  // namespace

void save_forecasts(const std::vector<ForecastResult>& results, const std::string& path) {
    std::ostringstream os;
    os << "section,model,spec,quarter,actual,forecast,lower,upper,fallback\n";
    auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    for (const auto& r : results) {
        for (const auto& s : r.steps) {
            os << r.section.code << ',' << r.model << ',' << r.spec << ',' << s.quarter.str()
               << ',' << cell(s.actual) << ',' << cell(s.forecast) << ',' << cell(s.lower) << ','
               << cell(s.upper) << ',' << (s.fallback ? 1 : 0) << '\n';
        }
    }
    write_text_atomic(path, os.str());
}

std::vector<ForecastResult> load_forecasts(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MissingArtifact("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "section,model,spec,quarter,actual,forecast,lower,upper,fallback")
        throw SchemaError(path + ": unexpected forecast csv header");

    std::vector<ForecastResult> results;
    auto find_result = [&](const std::string& section, const std::string& model,
                           const std::string& spec) -> ForecastResult& {
        for (auto& r : results)
            if (r.section.code == section && r.model == model && r.spec == spec) return r;
        ForecastResult r;
        r.section = {SeriesKind::CsiSection, section};
        r.model = model;
        r.spec = spec;
        results.push_back(std::move(r));
        return results.back();
    };
    auto parse_cell = [](const std::string& s) {
        return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::strtod(s.c_str(), nullptr);
    };
    size_t ln = 1;
    while (std::getline(f, line)) {
        ++ln;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 9)
            throw SchemaError(path + ":" + std::to_string(ln) + ": expected 9 fields");
        auto& r = find_result(fields[0], fields[1], fields[2]);
        ForecastStep step;
        step.quarter = parse_quarter(fields[3]);
        step.actual = parse_cell(fields[4]);
        step.forecast = parse_cell(fields[5]);
        step.lower = parse_cell(fields[6]);
        step.upper = parse_cell(fields[7]);
        step.fallback = fields[8] == "1";
        r.steps.push_back(step);
    }
    return results;
}

void stage_forecast(const RunConfig& cfg) {
    Panel panel = load_stage_panel(cfg);
    auto specs = resolve_specs(cfg, panel);
    auto sections = resolve_sections(cfg, panel);
    Quarter train_end = train_end_of(cfg, panel);
    Quarter test_end = panel.last_quarter();

    std::vector<SectionForecasts> slots(sections.size());
    parallel_for(static_cast<int>(sections.size()), cfg.workers, [&](int i) {
        slots[static_cast<size_t>(i)] =
            forecast_section(cfg, panel, specs, sections[static_cast<size_t>(i)], train_end,
                             test_end);
    });

    std::vector<ForecastResult> all;
    nlohmann::json statuses = nlohmann::json::object();
    for (size_t i = 0; i < sections.size(); ++i) {
        for (auto& r : slots[i].results) all.push_back(std::move(r));
        statuses[sections[i].code] = slots[i].statuses;
    }
    save_forecasts(all, out_path(cfg, "forecasts.csv").string());
    write_text_atomic(out_path(cfg, "statuses.json"), statuses.dump(2) + "\n");

    // attention interval export (lower,point,upper,sigma)
    std::ostringstream intervals;
    intervals << "section,spec,quarter,lower,point,upper,sigma\n";
    bool any = false;
    for (const auto& r : all) {
        if (r.model != "attention") continue;
        for (const auto& s : r.steps) {
            if (!s.has_interval()) continue;
            double z = stats::normal_quantile(1.0 - cfg.attention.alpha / 2.0);
            double sigma = std::isfinite(s.sigma) ? s.sigma : (s.upper - s.lower) / (2.0 * z);
            intervals << r.section.code << ',' << r.spec << ',' << s.quarter.str() << ','
                      << format_double(s.lower) << ',' << format_double(s.forecast) << ','
                      << format_double(s.upper) << ',' << format_double(sigma) << '\n';
            any = true;
        }
    }
    if (any) write_text_atomic(out_path(cfg, "attention_intervals.csv"), intervals.str());
}

void stage_evaluate(const RunConfig& cfg) {
    auto path = out_path(cfg, "forecasts.csv");
    if (!fs::exists(path)) throw MissingArtifact("expected " + path.string() + "; run forecast first");
    auto results = load_forecasts(path.string());
    if (results.empty()) throw DataError("no forecasts to evaluate");

    // per-section metrics
    std::vector<SectionMetrics> per_section;
    std::ostringstream mcsv;
    mcsv << "section,model,spec,n,rmse,mape,r2,r2_defined,mape_skipped,fallbacks\n";
    for (const auto& r : results) {
        std::vector<double> actual, predicted;
        for (const auto& s : r.steps) {
            if (!std::isfinite(s.actual) || !std::isfinite(s.forecast)) continue;
            actual.push_back(s.actual);
            predicted.push_back(s.forecast);
        }
        if (actual.empty()) continue;
        SectionMetrics sm;
        sm.section = r.section;
        sm.model = r.model;
        sm.spec = r.spec;
        sm.report = metrics(actual, predicted);
        per_section.push_back(sm);
        mcsv << r.section.code << ',' << r.model << ',' << r.spec << ',' << sm.report.n << ','
             << format_double(sm.report.rmse) << ',' << format_double(sm.report.mape) << ','
             << (sm.report.r2_defined ? format_double(sm.report.r2) : std::string()) << ','
             << (sm.report.r2_defined ? 1 : 0) << ',' << sm.report.mape_skipped << ','
             << r.fallback_count() << '\n';
    }
    write_text_atomic(out_path(cfg, "metrics.csv"), mcsv.str());

    auto summary = aggregate_report(per_section);
    write_text_atomic(out_path(cfg, "summary_table.txt"), render_summary_table(summary));
    {
        std::ostringstream scsv;
        scsv << "model,spec,n_sections,median_rmse,median_mape,median_r2,mean_rmse,mean_mape,mean_r2\n";
        for (const auto& row : summary)
            scsv << row.model << ',' << row.spec << ',' << row.n_sections << ','
                 << format_double(row.median.rmse) << ',' << format_double(row.median.mape) << ','
                 << (row.median.r2_defined ? format_double(row.median.r2) : std::string()) << ','
                 << format_double(row.mean.rmse) << ',' << format_double(row.mean.mape) << ','
                 << (row.mean.r2_defined ? format_double(row.mean.r2) : std::string()) << '\n';
        write_text_atomic(out_path(cfg, "summary.csv"), scsv.str());
    }

    // pooled errors by (model, spec), paired on (section, quarter)
    struct Pool {
        std::map<std::string, double> errors;  // "section/quarter" -> error
    };
    std::map<std::string, Pool> pools;
    for (const auto& r : results) {
        auto& pool = pools[r.model + "/" + r.spec];
        for (const auto& s : r.steps)
            if (std::isfinite(s.actual) && std::isfinite(s.forecast))
                pool.errors[r.section.code + "/" + s.quarter.str()] = s.actual - s.forecast;
    }

    std::vector<DmComparison> comparisons;
    std::vector<std::string> pool_names;
    for (const auto& [name, _] : pools) pool_names.push_back(name);
    for (size_t a = 0; a < pool_names.size(); ++a) {
        for (size_t b = a + 1; b < pool_names.size(); ++b) {
            const auto& pa = pools[pool_names[a]].errors;
            const auto& pb = pools[pool_names[b]].errors;
            std::vector<double> ea, eb;
            for (const auto& [k, v] : pa) {
                auto it = pb.find(k);
                if (it != pb.end()) {
                    ea.push_back(v);
                    eb.push_back(it->second);
                }
            }
            if (ea.size() < 10) continue;
            try {
                DmComparison cmp;
                cmp.label = pool_names[a] + " vs " + pool_names[b];
                cmp.result = dm_test(ea, eb, 1);
                comparisons.push_back(std::move(cmp));
            } catch (const DegenerateVariance&) {
                // identical pooled losses; nothing to report
            }
        }
    }
    write_text_atomic(out_path(cfg, "dm_table.txt"), render_dm_table(comparisons));
    {
        std::ostringstream dmcsv;
        dmcsv << "comparison,dbar,statistic,pvalue,n,nw_lag,stars\n";
        for (const auto& c : comparisons)
            dmcsv << csv_quote(c.label) << ',' << format_double(c.result.dbar) << ','
                  << format_double(c.result.statistic) << ',' << format_double(c.result.pvalue)
                  << ',' << c.result.n << ',' << c.result.nw_lag << ','
                  << dm_stars(c.result.pvalue) << '\n';
        write_text_atomic(out_path(cfg, "dm_tests.csv"), dmcsv.str());
    }
}

void stage_diagnose(const RunConfig& cfg) {
    Panel panel = load_stage_panel(cfg);
    std::string runid = cfg.run_id();

    {
        auto rows = diag::dispersion_table(panel, panel.quarters());
        std::ostringstream os;
        os << "quarter,n_sections,non_null_pct,median,iqr,mean,sd,cv\n";
        for (const auto& r : rows)
            os << r.quarter.str() << ',' << r.n_sections << ',' << format_double(r.non_null_pct)
               << ',' << format_double(r.median) << ',' << format_double(r.iqr) << ','
               << format_double(r.mean) << ',' << format_double(r.sd) << ','
               << format_double(r.cv) << '\n';
        write_text_atomic(out_path(cfg, "diag_dispersion_" + runid + ".csv"), os.str());
    }
    {
        std::ostringstream os;
        os << "section,q1,q2,q3,q4\n";
        for (const auto& key : panel.keys_of(SeriesKind::CsiSection)) {
            try {
                auto idx = diag::seasonal_indices(panel.get(key));
                os << key.code << ',' << format_double(idx[0]) << ',' << format_double(idx[1])
                   << ',' << format_double(idx[2]) << ',' << format_double(idx[3]) << '\n';
            } catch (const Error&) {
                // series too short or gappy; skipped
            }
        }
        write_text_atomic(out_path(cfg, "diag_seasonal_" + runid + ".csv"), os.str());
    }
    {
        std::ostringstream os;
        os << "section,lag,acf\n";
        for (const auto& key : panel.keys_of(SeriesKind::CsiSection)) {
            const auto& s = panel.get(key);
            int max_lag = std::min<int>(13, static_cast<int>(s.size()) - 1);
            try {
                auto r = diag::acf(s, max_lag);
                for (int lag = 1; lag <= max_lag; ++lag)
                    os << key.code << ',' << lag << ',' << format_double(r[static_cast<size_t>(lag - 1)])
                       << '\n';
            } catch (const Error&) {
            }
        }
        write_text_atomic(out_path(cfg, "diag_acf_" + runid + ".csv"), os.str());
    }
    {
        std::ostringstream os;
        os << "section,ppi,quarter,correlation\n";
        for (const auto& skey : panel.keys_of(SeriesKind::CsiSection)) {
            for (const auto& pkey : panel.keys_of(SeriesKind::Ppi)) {
                try {
                    auto roll = diag::rolling_correlation(panel.get(skey), panel.get(pkey), 24);
                    for (size_t t = 0; t < roll.size(); ++t)
                        if (std::isfinite(roll[t]))
                            os << skey.code << ',' << pkey.code << ','
                               << panel.quarters()[t].str() << ',' << format_double(roll[t])
                               << '\n';
                } catch (const Error&) {
                }
            }
        }
        write_text_atomic(out_path(cfg, "diag_rollcorr_" + runid + ".csv"), os.str());
    }
    {
        auto cm = diag::correlation_matrix(panel);
        int k = std::min<int>(4, static_cast<int>(cm.keys.size()));
        auto clusters = diag::correlation_cluster(cm, panel, k);
        std::ostringstream os;
        os << "section,cluster\n";
        for (size_t i = 0; i < cm.keys.size(); ++i)
            os << cm.keys[i].code << ',' << clusters.labels[i] << '\n';
        write_text_atomic(out_path(cfg, "diag_clusters_" + runid + ".csv"), os.str());
    }
}

int run_pipeline(const RunConfig& cfg) {
    using clock = std::chrono::steady_clock;
    nlohmann::json timings = nlohmann::json::object();
    auto timed = [&](const char* name, const std::function<void()>& fn) {
        auto t0 = clock::now();
        fn();
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0);
        timings[name] = ms.count();
    };

    timed("data_ms", [&] { stage_data(cfg); });
    timed("features_ms", [&] { stage_features(cfg); });
    timed("train_ms", [&] { stage_train(cfg); });
    timed("forecast_ms", [&] { stage_forecast(cfg); });
    timed("evaluate_ms", [&] { stage_evaluate(cfg); });
    timed("diagnose_ms", [&] { stage_diagnose(cfg); });

    // statuses collected by the forecast stage
    nlohmann::json statuses = nlohmann::json::object();
    {
        std::ifstream f(out_path(cfg, "statuses.json"));
        if (f) f >> statuses;
    }
    nlohmann::json fallback_counts = nlohmann::json::object();
    {
        auto results = load_forecasts(out_path(cfg, "forecasts.csv").string());
        std::map<std::string, int> counts;
        for (const auto& r : results) counts[r.model + "/" + r.spec] += r.fallback_count();
        for (const auto& [k, v] : counts) fallback_counts[k] = v;
    }

    nlohmann::json manifest = nlohmann::json::object();
    manifest["code_version"] = kCodeVersion;
    manifest["config_hash"] = cfg.run_id();
    manifest["seed"] = cfg.seed;
    manifest["statuses"] = statuses;
    manifest["fallback_counts"] = fallback_counts;
    nlohmann::json artifacts = nlohmann::json::array();
    for (const char* name : {"panel.csv", "forecasts.csv", "metrics.csv", "summary_table.txt",
                             "dm_tests.csv"})
        artifacts.push_back(name);
    manifest["artifacts"] = artifacts;
    // timings live in a sidecar so the manifest stays byte-identical across reruns
    manifest["timings_file"] = "timings.json";
    write_text_atomic(out_path(cfg, "manifest.json"), manifest.dump(2) + "\n");
    write_text_atomic(out_path(cfg, "timings.json"), timings.dump(2) + "\n");
    return 0;
}

}  // namespace mpf::pipeline
