#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mpf/series.hpp"

namespace mpf {

struct ForecastStep {
    Quarter quarter;
    double actual = std::numeric_limits<double>::quiet_NaN();
    double forecast = std::numeric_limits<double>::quiet_NaN();
    double lower = std::numeric_limits<double>::quiet_NaN();
    double upper = std::numeric_limits<double>::quiet_NaN();
    double sigma = std::numeric_limits<double>::quiet_NaN();
    bool fallback = false;

    bool has_interval() const { return std::isfinite(lower) && std::isfinite(upper); }
};

// Point forecasts for one section over a test span, with provenance and
// optional intervals.
struct ForecastResult {
    SeriesKey section;
    std::string model;  // "lstm" | "sarimax" | "vecm" | "attention" | "naive" | "seasonal_naive"
    std::string spec;   // "base_model" | "fine_model"
    std::vector<ForecastStep> steps;

    int fallback_count() const {
        int n = 0;
        for (const auto& s : steps) n += s.fallback ? 1 : 0;
        return n;
    }
    std::vector<double> actuals() const {
        std::vector<double> out;
        for (const auto& s : steps) out.push_back(s.actual);
        return out;
    }
    std::vector<double> forecasts() const {
        std::vector<double> out;
        for (const auto& s : steps) out.push_back(s.forecast);
        return out;
    }
    // forecast errors actual - forecast, only over steps with known actuals
    std::vector<double> errors() const {
        std::vector<double> out;
        for (const auto& s : steps)
            if (std::isfinite(s.actual)) out.push_back(s.actual - s.forecast);
        return out;
    }
};

}  // namespace mpf
