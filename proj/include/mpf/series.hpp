#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpf/quarter.hpp"

namespace mpf {

enum class SeriesKind { CsiSection, Ppi, Macro, CityCostIndex };

std::string to_string(SeriesKind k);
SeriesKind series_kind_from_string(const std::string& s);  // throws SchemaError

struct SeriesKey {
    SeriesKind kind = SeriesKind::CsiSection;
    std::string code;

    auto operator<=>(const SeriesKey&) const = default;

    std::string str() const { return to_string(kind) + ":" + code; }

    // CSI section codes are six decimal digits; the division is the first two
    bool is_csi() const { return kind == SeriesKind::CsiSection; }
    std::string division() const { return code.size() >= 2 ? code.substr(0, 2) : code; }
};

bool valid_csi_code(const std::string& code);

// One quarterly series. values/observed run in lockstep from `start`;
// unobserved slots hold NaN in values.
struct Series {
    SeriesKey key;
    Quarter start;
    std::vector<double> values;
    std::vector<bool> observed;

    size_t size() const { return values.size(); }
    Quarter quarter_at(size_t i) const { return start.plus(static_cast<std::int64_t>(i)); }

    // index of the given quarter, or nullopt if outside the axis
    std::optional<size_t> index_of(const Quarter& q) const {
        auto d = quarters_between(start, q);
        if (d < 0 || d >= static_cast<std::int64_t>(values.size())) return std::nullopt;
        return static_cast<size_t>(d);
    }

    bool observed_at(const Quarter& q) const {
        auto i = index_of(q);
        return i && observed[*i];
    }
    double at(const Quarter& q) const;  // throws DataError if outside axis

    // trailing slice covering quarters <= q (used by the leakage machinery)
    Series truncated_after(const Quarter& q) const;
};

struct CatalogRow {
    std::string division;  // two digits
    std::string section;   // six digits
    std::string title;
    std::string description;
    bool is_material = false;
};

// Time-aligned collection of quarterly series on one gap-free axis.
// Immutable after construction; all accessors are const.
class Panel {
public:
    Panel() = default;

    // Aligns every series to the common [min(start), max(end)] axis, padding
    // with unobserved NaN slots. Throws DuplicateKey on repeated keys.
    static Panel build(std::vector<Series> series);

    const std::vector<Quarter>& quarters() const { return quarters_; }
    Quarter first_quarter() const { return quarters_.front(); }
    Quarter last_quarter() const { return quarters_.back(); }
    size_t length() const { return quarters_.size(); }

    const std::vector<Series>& series() const { return series_; }
    size_t count() const { return series_.size(); }

    bool has(const SeriesKey& key) const;
    const Series& get(const SeriesKey& key) const;  // throws DataError
    const Series* find(const SeriesKey& key) const;

    std::vector<SeriesKey> keys() const;
    std::vector<SeriesKey> keys_of(SeriesKind kind) const;

    // replaces (or inserts) a series; it must cover the same axis
    Panel with_series(Series s) const;

    // panel restricted to quarters <= q (leakage tests, walk-forward)
    Panel truncated_after(const Quarter& q) const;
    // panel restricted to [from, to] inclusive
    Panel slice(const Quarter& from, const Quarter& to) const;

    Quarter base = Quarter{0, 1};  // rebasing base quarter, carried as metadata

private:
    std::vector<Quarter> quarters_;
    std::vector<Series> series_;
};

}  // namespace mpf
