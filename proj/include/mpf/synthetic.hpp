#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpf/series.hpp"

namespace mpf {

struct ShockWindow {
    Quarter start;
    Quarter end;
    double multiplier = 1.0;  // applied to section levels inside [start, end]
};

// Data-generating process with known ground truth. Drivers are log random
// walks with drift; each section is a positive combination of lagged drivers
// times a quarter-of-year seasonal factor, with i.i.d. log-space noise.
// Everything is generated in log space and exponentiated, so index values
// stay strictly positive.
struct DgpConfig {
    int n_sections = 5;
    int n_ppi = 3;
    int n_macro = 2;
    int T = 78;  // 2007Q1..2025Q2 is quoted as 78 observations per series
    std::uint64_t seed = 1;
    double seasonal_amplitude = 0.0;
    double trend_drift = 0.0;  // per-quarter log drift of the drivers
    double noise_sd = 0.0;     // log-space sd of driver innovations and section noise
    double driver_noise_scale = 1.0;  // driver innovation sd = noise_sd * this
    std::optional<ShockWindow> shock;
    // weights[i][j] = loading of section i on driver j; empty = round-robin
    // unit weight on driver (i mod n_ppi)
    std::vector<std::vector<double>> cointegration;
    int driver_lead = 1;  // quarters by which drivers lead the sections
    Quarter start{2007, 1};

    void validate() const;  // throws InvalidConfig
};

struct GroundTruth {
    std::vector<std::vector<double>> weights;        // effective section/driver loadings
    std::array<double, 4> seasonal_factors{1, 1, 1, 1};  // multiplicative, mean 1
    std::array<double, 4> seasonal_indices{0, 0, 0, 0};  // factors - 1 (plot form)
    std::optional<ShockWindow> shock;
    int driver_lead = 1;
    double noise_sd = 0.0;
};

struct GeneratedPanel {
    Panel panel;
    GroundTruth truth;
};

GeneratedPanel generate_panel(const DgpConfig& cfg);

// Test fixture for cointegration machinery: y1 is a random walk, y2 =
// beta * y1 + stationary AR(1) error, so (1, -beta) is a cointegrating
// vector. Level-space, start level 100.
Panel generate_cointegrated_pair(int T, double beta, std::uint64_t seed,
                                 double err_sd = 1.0, double err_ar = 0.7,
                                 double walk_sd = 1.0);

SeriesKey section_key(int i);
SeriesKey ppi_key(int j);
SeriesKey macro_key(int j);

void to_json(nlohmann::json& j, const DgpConfig& cfg);
void from_json(const nlohmann::json& j, DgpConfig& cfg);
void to_json(nlohmann::json& j, const GroundTruth& gt);
void from_json(const nlohmann::json& j, GroundTruth& gt);

}  // namespace mpf
