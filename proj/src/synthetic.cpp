#include "mpf/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "mpf/errors.hpp"
#include "mpf/preprocess.hpp"
#include "mpf/rng.hpp"

namespace mpf {

namespace {

std::string zero_padded(int v, int width) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%0*d", width, v);
    return buf;
}

}  // namespace

SeriesKey section_key(int i) {
    // synthetic sections live in division 06; codes 060001, 060002, ...
    return {SeriesKind::CsiSection, "06" + zero_padded(i + 1, 4)};
}
SeriesKey ppi_key(int j) { return {SeriesKind::Ppi, "ppi_" + zero_padded(j + 1, 3)}; }
SeriesKey macro_key(int j) { return {SeriesKind::Macro, "macro_" + zero_padded(j + 1, 3)}; }

void DgpConfig::validate() const {
    if (n_sections < 1 || n_ppi < 1 || n_macro < 1)
        throw InvalidConfig("all series counts must be >= 1");
    if (T < 24) throw InvalidConfig("T must be >= 24");
    if (noise_sd < 0.0) throw InvalidConfig("noise_sd must be >= 0");
    if (driver_noise_scale < 0.0) throw InvalidConfig("driver_noise_scale must be >= 0");
    if (driver_lead < 0) throw InvalidConfig("driver_lead must be >= 0");
    if (shock) {
        if (!(shock->multiplier > 0.0)) throw InvalidConfig("shock multiplier must be > 0");
        if (shock->start > shock->end) throw InvalidConfig("shock window reversed");
    }
    if (!cointegration.empty()) {
        if (static_cast<int>(cointegration.size()) != n_sections)
            throw InvalidConfig("cointegration weights must have one row per section");
        for (const auto& row : cointegration)
            if (static_cast<int>(row.size()) != n_ppi)
                throw InvalidConfig("cointegration weight row length must equal n_ppi");
    }
}

GeneratedPanel generate_panel(const DgpConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const int T = cfg.T;
    const int lead = cfg.driver_lead;

    // seasonal factors, multiplicative with arithmetic mean exactly 1 so a
    // moving-average detrend recovers them without bias
    static const double pattern[4] = {1.0, -0.5, -1.0, 0.5};
    std::array<double, 4> factors{};
    double fsum = 0.0;
    for (int k = 0; k < 4; ++k) {
        factors[k] = std::exp(cfg.seasonal_amplitude * pattern[k]);
        fsum += factors[k];
    }
    for (int k = 0; k < 4; ++k) factors[k] /= (fsum / 4.0);

    // driver paths, with `lead` pre-sample quarters so sections are defined
    // from the first panel quarter
    const double driver_sd = cfg.noise_sd * cfg.driver_noise_scale;
    std::vector<std::vector<double>> log_drivers(cfg.n_ppi,
                                                 std::vector<double>(T + lead, 0.0));
    for (int j = 0; j < cfg.n_ppi; ++j) {
        double level = std::log(100.0);
        for (int t = 0; t < T + lead; ++t) {
            if (t > 0) level += cfg.trend_drift + driver_sd * rng.normal();
            log_drivers[j][t] = level;
        }
    }

    std::vector<std::vector<double>> log_macro(cfg.n_macro, std::vector<double>(T, 0.0));
    for (int j = 0; j < cfg.n_macro; ++j) {
        double level = std::log(100.0);
        for (int t = 0; t < T; ++t) {
            if (t > 0) level += cfg.trend_drift + cfg.noise_sd * rng.normal();
            log_macro[j][t] = level;
        }
    }

    // effective weights
    std::vector<std::vector<double>> weights = cfg.cointegration;
    if (weights.empty()) {
        weights.assign(cfg.n_sections, std::vector<double>(cfg.n_ppi, 0.0));
        for (int i = 0; i < cfg.n_sections; ++i) weights[i][i % cfg.n_ppi] = 1.0;
    }

    // driver array index k corresponds to panel time k - lead, so the driver
    // value leading section time t by `lead` quarters sits at array index t
    std::vector<std::vector<double>> log_sections(cfg.n_sections, std::vector<double>(T, 0.0));
    for (int i = 0; i < cfg.n_sections; ++i) {
        for (int t = 0; t < T; ++t) {
            double v = 0.0;
            for (int j = 0; j < cfg.n_ppi; ++j) v += weights[i][j] * log_drivers[j][t];
            Quarter q = cfg.start.plus(t);
            v += std::log(factors[q.q - 1]);
            if (cfg.noise_sd > 0.0) v += cfg.noise_sd * rng.normal();
            if (cfg.shock && q >= cfg.shock->start && q <= cfg.shock->end)
                v += std::log(cfg.shock->multiplier);
            log_sections[i][t] = v;
        }
    }

    auto make_series = [&](const SeriesKey& key, const std::vector<double>& logs,
                           int offset) {
        Series s;
        s.key = key;
        s.start = cfg.start;
        s.values.resize(T);
        s.observed.assign(T, true);
        for (int t = 0; t < T; ++t) s.values[t] = std::exp(logs[t + offset]);
        return rebase(s, cfg.start, 100.0);
    };

    std::vector<Series> all;
    for (int i = 0; i < cfg.n_sections; ++i)
        all.push_back(make_series(section_key(i), log_sections[i], 0));
    // panel shows the last T driver points, so the section at panel time t
    // depends on the panel driver at t - lead
    for (int j = 0; j < cfg.n_ppi; ++j)
        all.push_back(make_series(ppi_key(j), log_drivers[j], lead));
    for (int j = 0; j < cfg.n_macro; ++j)
        all.push_back(make_series(macro_key(j), log_macro[j], 0));

    GeneratedPanel out;
    out.panel = Panel::build(std::move(all));
    out.panel.base = cfg.start;
    out.truth.weights = std::move(weights);
    out.truth.seasonal_factors = factors;
    for (int k = 0; k < 4; ++k) out.truth.seasonal_indices[k] = factors[k] - 1.0;
    out.truth.shock = cfg.shock;
    out.truth.driver_lead = lead;
    out.truth.noise_sd = cfg.noise_sd;
    return out;
}

Panel generate_cointegrated_pair(int T, double beta, std::uint64_t seed, double err_sd,
                                 double err_ar, double walk_sd) {
    if (T < 50) throw InvalidConfig("cointegrated pair needs T >= 50");
    Rng rng(seed);
    Series y1, y2;
    y1.key = {SeriesKind::Macro, "pair_y1"};
    y2.key = {SeriesKind::Macro, "pair_y2"};
    y1.start = y2.start = Quarter{2000, 1};
    y1.values.resize(T);
    y2.values.resize(T);
    y1.observed.assign(T, true);
    y2.observed.assign(T, true);

    double level = 100.0;
    double err = 0.0;
    for (int t = 0; t < T; ++t) {
        if (t > 0) {
            level += walk_sd * rng.normal();
            err = err_ar * err + err_sd * rng.normal();
        }
        y1.values[t] = level;
        y2.values[t] = beta * level + err;
    }
    return Panel::build({std::move(y1), std::move(y2)});
}

void to_json(nlohmann::json& j, const DgpConfig& cfg) {
    j = nlohmann::json{{"n_sections", cfg.n_sections}, {"n_ppi", cfg.n_ppi},
                       {"n_macro", cfg.n_macro},       {"T", cfg.T},
                       {"seed", cfg.seed},             {"seasonal_amplitude", cfg.seasonal_amplitude},
                       {"trend_drift", cfg.trend_drift}, {"noise_sd", cfg.noise_sd},
                       {"driver_noise_scale", cfg.driver_noise_scale},
                       {"driver_lead", cfg.driver_lead}, {"start", cfg.start.str()}};
    if (cfg.shock)
        j["shock"] = {{"start", cfg.shock->start.str()},
                      {"end", cfg.shock->end.str()},
                      {"multiplier", cfg.shock->multiplier}};
    if (!cfg.cointegration.empty()) j["cointegration"] = cfg.cointegration;
}

void from_json(const nlohmann::json& j, DgpConfig& cfg) {
    cfg = DgpConfig{};
    cfg.n_sections = j.value("n_sections", cfg.n_sections);
    cfg.n_ppi = j.value("n_ppi", cfg.n_ppi);
    cfg.n_macro = j.value("n_macro", cfg.n_macro);
    cfg.T = j.value("T", cfg.T);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.seasonal_amplitude = j.value("seasonal_amplitude", cfg.seasonal_amplitude);
    cfg.trend_drift = j.value("trend_drift", cfg.trend_drift);
    cfg.noise_sd = j.value("noise_sd", cfg.noise_sd);
    cfg.driver_noise_scale = j.value("driver_noise_scale", cfg.driver_noise_scale);
    cfg.driver_lead = j.value("driver_lead", cfg.driver_lead);
    if (j.contains("start")) cfg.start = parse_quarter(j["start"].get<std::string>());
    if (j.contains("shock")) {
        ShockWindow w;
        w.start = parse_quarter(j["shock"]["start"].get<std::string>());
        w.end = parse_quarter(j["shock"]["end"].get<std::string>());
        w.multiplier = j["shock"]["multiplier"].get<double>();
        cfg.shock = w;
    }
    if (j.contains("cointegration"))
        cfg.cointegration = j["cointegration"].get<std::vector<std::vector<double>>>();
}

void to_json(nlohmann::json& j, const GroundTruth& gt) {
    j = nlohmann::json{{"weights", gt.weights},
                       {"seasonal_factors", gt.seasonal_factors},
                       {"seasonal_indices", gt.seasonal_indices},
                       {"driver_lead", gt.driver_lead},
                       {"noise_sd", gt.noise_sd}};
    if (gt.shock)
        j["shock"] = {{"start", gt.shock->start.str()},
                      {"end", gt.shock->end.str()},
                      {"multiplier", gt.shock->multiplier}};
}

void from_json(const nlohmann::json& j, GroundTruth& gt) {
    gt = GroundTruth{};
    gt.weights = j.value("weights", gt.weights);
    if (j.contains("seasonal_factors"))
        gt.seasonal_factors = j["seasonal_factors"].get<std::array<double, 4>>();
    if (j.contains("seasonal_indices"))
        gt.seasonal_indices = j["seasonal_indices"].get<std::array<double, 4>>();
    gt.driver_lead = j.value("driver_lead", gt.driver_lead);
    gt.noise_sd = j.value("noise_sd", gt.noise_sd);
    if (j.contains("shock")) {
        ShockWindow w;
        w.start = parse_quarter(j["shock"]["start"].get<std::string>());
        w.end = parse_quarter(j["shock"]["end"].get<std::string>());
        w.multiplier = j["shock"]["multiplier"].get<double>();
        gt.shock = w;
    }
}

}  // namespace mpf
