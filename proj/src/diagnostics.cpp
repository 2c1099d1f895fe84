#include "mpf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "mpf/errors.hpp"
#include "mpf/stats.hpp"

namespace mpf::diag {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

std::vector<DispersionRow> dispersion_table(const Panel& panel,
                                            const std::vector<Quarter>& quarters) {
    auto keys = panel.keys_of(SeriesKind::CsiSection);
    if (keys.empty()) throw EmptyInput("panel has no CSI sections");

    std::vector<DispersionRow> rows;
    for (const auto& q : quarters) {
        DispersionRow row;
        row.quarter = q;
        row.n_sections = static_cast<int>(keys.size());
        std::vector<double> xs;
        for (const auto& key : keys) {
            const auto& s = panel.get(key);
            auto i = s.index_of(q);
            if (i && s.observed[*i]) xs.push_back(s.values[*i]);
        }
        row.non_null_pct = 100.0 * static_cast<double>(xs.size()) / keys.size();
        if (!xs.empty()) {
            row.median = stats::median(xs);
            row.iqr = stats::iqr(xs);
            row.mean = stats::mean(xs);
            row.sd = xs.size() >= 2 ? stats::sd(xs) : 0.0;
            row.cv = row.mean != 0.0 ? row.sd / row.mean : 0.0;
        }
        rows.push_back(row);
    }
    return rows;
}

namespace {

std::array<double, 4> normalize_to_index(std::array<double, 4> m) {
    double mean = (m[0] + m[1] + m[2] + m[3]) / 4.0;
    for (auto& v : m) v = v / mean - 1.0;
    return m;
}

std::array<double, 4> seasonal_ma(const Series& s) {
    size_t n = s.size();
    std::array<double, 4> sums{0, 0, 0, 0};
    std::array<int, 4> counts{0, 0, 0, 0};
    // centered 2x4 moving average needs two quarters each side
    for (size_t t = 2; t + 2 < n; ++t) {
        double trend = (0.5 * s.values[t - 2] + s.values[t - 1] + s.values[t] +
                        s.values[t + 1] + 0.5 * s.values[t + 2]) / 4.0;
        if (trend == 0.0) continue;
        int q = s.quarter_at(t).q - 1;
        sums[q] += s.values[t] / trend;
        counts[q] += 1;
    }
    std::array<double, 4> m{};
    for (int q = 0; q < 4; ++q) {
        if (counts[q] == 0) throw TooShort("no interior observations for quarter " +
                                           std::to_string(q + 1));
        m[q] = sums[q] / counts[q];
    }
    return m;
}

std::array<double, 4> seasonal_dummy(const Series& s) {
    // log-space regression on {1, t, q2, q3, q4}
    size_t n = s.size();
    Eigen::MatrixXd X(n, 5);
    Eigen::VectorXd y(n);
    for (size_t t = 0; t < n; ++t) {
        if (!(s.values[t] > 0.0))
            throw NonPositiveValue("dummy-regression detrend needs positive values");
        y(t) = std::log(s.values[t]);
        int q = s.quarter_at(t).q;
        X(t, 0) = 1.0;
        X(t, 1) = static_cast<double>(t);
        X(t, 2) = q == 2 ? 1.0 : 0.0;
        X(t, 3) = q == 3 ? 1.0 : 0.0;
        X(t, 4) = q == 4 ? 1.0 : 0.0;
    }
    Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    return {1.0, std::exp(beta(2)), std::exp(beta(3)), std::exp(beta(4))};
}

}  // namespace

std::array<double, 4> seasonal_indices(const Series& s, Detrend method) {
    if (s.size() < 8) throw TooShort("seasonal indices need at least two full years");
    for (size_t t = 0; t < s.size(); ++t)
        if (!s.observed[t] || !std::isfinite(s.values[t]))
            throw DataError("seasonal indices need a fully observed series");
    auto m = method == Detrend::MovingAverage ? seasonal_ma(s) : seasonal_dummy(s);
    return normalize_to_index(m);
}

std::vector<double> acf(const Series& s, int max_lag) {
    size_t n = s.size();
    if (max_lag < 1 || static_cast<size_t>(max_lag) >= n)
        throw InvalidConfig("acf needs 1 <= max_lag < n");
    double mean = stats::mean(s.values);
    double denom = 0.0;
    for (double v : s.values) denom += (v - mean) * (v - mean);
    if (denom == 0.0) throw ZeroVariance("acf of a constant series");

    std::vector<double> out;
    for (int k = 1; k <= max_lag; ++k) {
        double acc = 0.0;
        for (size_t t = static_cast<size_t>(k); t < n; ++t)
            acc += (s.values[t] - mean) * (s.values[t - k] - mean);
        out.push_back(acc / denom);
    }
    return out;
}

std::vector<double> rolling_correlation(const Series& a, const Series& b, int window) {
    if (a.start != b.start || a.size() != b.size())
        throw MisalignedAxis("rolling correlation needs a shared axis");
    if (a.size() < static_cast<size_t>(window)) throw TooShort("overlap shorter than window");

    std::vector<double> out(a.size(), kNan);
    for (size_t t = static_cast<size_t>(window) - 1; t < a.size(); ++t) {
        std::span<const double> wa(a.values.data() + t + 1 - window, static_cast<size_t>(window));
        std::span<const double> wb(b.values.data() + t + 1 - window, static_cast<size_t>(window));
        try {
            out[t] = stats::pearson(wa, wb);
        } catch (const ZeroVariance&) {
            // masked
        }
    }
    return out;
}

CorrelationMatrix correlation_matrix(const Panel& panel) {
    auto keys = panel.keys_of(SeriesKind::CsiSection);
    if (keys.empty()) throw EmptyInput("panel has no CSI sections");

    // quarter-over-quarter log changes
    std::vector<std::vector<double>> changes;
    for (const auto& key : keys) {
        const auto& s = panel.get(key);
        std::vector<double> d(s.size() > 0 ? s.size() - 1 : 0, kNan);
        for (size_t t = 1; t < s.size(); ++t)
            if (s.observed[t] && s.observed[t - 1] && s.values[t] > 0 && s.values[t - 1] > 0)
                d[t - 1] = std::log(s.values[t]) - std::log(s.values[t - 1]);
        changes.push_back(std::move(d));
    }

    size_t n = keys.size();
    CorrelationMatrix m;
    m.keys = keys;
    m.rho.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) m.rho[i][i] = 1.0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            std::vector<double> xi, xj;
            for (size_t t = 0; t < changes[i].size(); ++t) {
                if (std::isfinite(changes[i][t]) && std::isfinite(changes[j][t])) {
                    xi.push_back(changes[i][t]);
                    xj.push_back(changes[j][t]);
                }
            }
            double rho = 0.0;
            if (xi.size() >= 2) {
                try {
                    rho = stats::pearson(xi, xj);
                } catch (const ZeroVariance&) {
                    rho = 0.0;
                }
            }
            m.rho[i][j] = m.rho[j][i] = rho;
        }
    }
    return m;
}

ClusterResult correlation_cluster(const CorrelationMatrix& m, const Panel& panel, int k) {
    size_t n = m.keys.size();
    if (k < 1) throw InvalidConfig("clustering needs k >= 1");
    if (static_cast<size_t>(k) > n) throw InvalidConfig("k exceeds the number of series");

    std::vector<std::vector<size_t>> clusters;
    for (size_t i = 0; i < n; ++i) clusters.push_back({i});

    auto avg_distance = [&](const std::vector<size_t>& a, const std::vector<size_t>& b) {
        double acc = 0.0;
        for (size_t i : a)
            for (size_t j : b) acc += 1.0 - m.rho[i][j];
        return acc / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };

    while (clusters.size() > static_cast<size_t>(k)) {
        double best = std::numeric_limits<double>::infinity();
        size_t bi = 0, bj = 1;
        for (size_t i = 0; i < clusters.size(); ++i) {
            for (size_t j = i + 1; j < clusters.size(); ++j) {
                double d = avg_distance(clusters[i], clusters[j]);
                // tie-break on the smallest member pair for determinism
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        auto& a = clusters[bi];
        auto& b = clusters[bj];
        a.insert(a.end(), b.begin(), b.end());
        std::sort(a.begin(), a.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    // label clusters by their smallest member so output order is stable
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    ClusterResult res;
    res.labels.assign(n, 0);
    for (size_t c = 0; c < clusters.size(); ++c)
        for (size_t i : clusters[c]) res.labels[i] = static_cast<int>(c);

    // prototypes: mean of z-scored quarter-over-quarter log changes
    std::vector<std::vector<double>> standardized;
    for (const auto& key : m.keys) {
        const auto& s = panel.get(key);
        std::vector<double> d;
        for (size_t t = 1; t < s.size(); ++t)
            d.push_back(std::log(s.values[t]) - std::log(s.values[t - 1]));
        double mu = stats::mean(d);
        double sd = stats::sd(d);
        for (auto& v : d) v = sd > 0 ? (v - mu) / sd : 0.0;
        standardized.push_back(std::move(d));
    }
    for (const auto& cl : clusters) {
        std::vector<double> proto(standardized[0].size(), 0.0);
        for (size_t i : cl)
            for (size_t t = 0; t < proto.size(); ++t) proto[t] += standardized[i][t];
        for (auto& v : proto) v /= static_cast<double>(cl.size());
        res.prototypes.push_back(std::move(proto));
    }
    return res;
}

}  // namespace mpf::diag
