#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace mpf {

// Calendar quarter. Ordered lexicographically by (year, q); arithmetic is
// exact integer arithmetic on the quarter count since year 0.
struct Quarter {
    int year = 0;
    int q = 1;  // 1..4

    constexpr auto operator<=>(const Quarter&) const = default;

    // quarters since 0000Q1; the canonical index used for arithmetic
    constexpr std::int64_t index() const {
        return static_cast<std::int64_t>(year) * 4 + (q - 1);
    }
    static constexpr Quarter from_index(std::int64_t idx) {
        Quarter out;
        // floor division so negative indices behave
        std::int64_t y = idx >= 0 ? idx / 4 : (idx - 3) / 4;
        out.year = static_cast<int>(y);
        out.q = static_cast<int>(idx - y * 4) + 1;
        return out;
    }

    constexpr Quarter plus(std::int64_t n) const { return from_index(index() + n); }
    constexpr Quarter next() const { return plus(1); }
    constexpr Quarter prev() const { return plus(-1); }

    bool valid() const { return q >= 1 && q <= 4; }

    std::string str() const;  // "2020Q3"
};

// number of quarters from a to b (b.index() - a.index())
inline std::int64_t quarters_between(const Quarter& a, const Quarter& b) {
    return b.index() - a.index();
}

// Parses "YYYYQn"; throws SchemaError on malformed input or n outside 1..4.
Quarter parse_quarter(const std::string& text);

}  // namespace mpf
