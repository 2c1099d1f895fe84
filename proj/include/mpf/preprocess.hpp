#pragma once

#include <utility>
#include <vector>

#include "mpf/series.hpp"

namespace mpf {

// Scales s so the base quarter equals base_value (conventionally 100).
// Throws MissingBase / NonPositiveBase.
Series rebase(const Series& s, const Quarter& base, double base_value = 100.0);

// Divides s_t by (cci_t / 100), restoring national-level comparability.
// The CCI series must be observed and positive wherever s is observed.
Series cci_adjust(const Series& s, const Series& cci);

// Drops Division 01/02 rows and rows whose title or description contains a
// taxonomy keyword (case-insensitive substring over title ++ description).
// Survivors come back with is_material = true, input order preserved.
std::vector<CatalogRow> exclude_services(const std::vector<CatalogRow>& rows,
                                         const std::vector<std::string>& taxonomy);

struct MonthlyInput {
    int start_year = 0;
    int start_month = 1;  // 1..12
    std::vector<double> values;
    std::vector<bool> observed;  // empty means all observed
};

// Aggregates monthly observations to quarterly means. Quarters with zero
// observed months are masked missing; partial quarters use the mean of the
// observed months.
Series align_monthly_to_quarterly(const MonthlyInput& in, const SeriesKey& key);

// Chronological split: train gets floor(T * train_fraction) quarters, test
// gets the remainder. Throws TooShort if either block would be empty.
std::pair<Panel, Panel> train_test_split(const Panel& p, double train_fraction);

// Last-observation-carried-forward for gaps of at most max_run consecutive
// quarters; longer runs (and any leading gap) are left as NaN. Returns true
// only when every slot ends up with a finite value, i.e. the series is
// usable as a modeling target. Imputed slots stay flagged unobserved.
bool impute_locf(Series& s, int max_run = 2);

}  // namespace mpf
