#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mpf/errors.hpp"
#include "mpf/panel_io.hpp"
#include "mpf/preprocess.hpp"
#include "mpf/rng.hpp"
#include "mpf/series.hpp"

using namespace mpf;

namespace {

Series make_series(const SeriesKey& key, Quarter start, std::vector<double> values) {
    Series s;
    s.key = key;
    s.start = start;
    s.observed.assign(values.size(), true);
    s.values = std::move(values);
    return s;
}

const SeriesKey kSec{SeriesKind::CsiSection, "061100"};
const SeriesKey kCci{SeriesKind::CityCostIndex, "sanjose"};

}  // namespace

TEST_CASE("quarter ordering and arithmetic") {
    Quarter a{2020, 4};
    Quarter b{2021, 1};
    CHECK(a < b);
    CHECK(a.next() == b);
    CHECK(b.prev() == a);
    CHECK(a.plus(4) == Quarter{2021, 4});
    CHECK(quarters_between(a, b) == 1);
    CHECK(parse_quarter("2020Q3") == Quarter{2020, 3});
    CHECK(Quarter{2020, 3}.str() == "2020Q3");
    CHECK_THROWS_AS(parse_quarter("2020Q5"), SchemaError);
    CHECK_THROWS_AS(parse_quarter("garbage"), SchemaError);
}

TEST_CASE("rebase forces 100 at the base quarter") {
    auto s = make_series(kSec, {2020, 1}, {250, 300, 200});
    auto r = rebase(s, {2020, 1}, 100.0);
    CHECK(r.values[0] == doctest::Approx(100.0));
}

TEST_CASE("rebase is plain proportionality") {
    auto s = make_series(kSec, {2020, 1}, {50, 100, 150});
    auto r = rebase(s, {2020, 1}, 100.0);
    CHECK(r.values[0] == doctest::Approx(100));
    CHECK(r.values[1] == doctest::Approx(200));
    CHECK(r.values[2] == doctest::Approx(300));
}

TEST_CASE("rebase errors") {
    auto s = make_series(kSec, {2020, 1}, {50, 100});
    CHECK_THROWS_AS(rebase(s, {2019, 1}, 100.0), MissingBase);
    s.values[0] = 0.0;
    CHECK_THROWS_AS(rebase(s, {2020, 1}, 100.0), NonPositiveBase);
}

TEST_CASE("rebase is idempotent") {
    Rng rng(7);
    std::vector<double> vals;
    for (int i = 0; i < 12; ++i) vals.push_back(std::exp(rng.normal(4.6, 0.3)));
    auto s = make_series(kSec, {2019, 1}, vals);
    auto once = rebase(s, {2019, 2}, 100.0);
    auto twice = rebase(once, {2019, 2}, 100.0);
    for (size_t i = 0; i < once.size(); ++i) CHECK(once.values[i] == twice.values[i]);
}

TEST_CASE("monthly aggregation then rebase matches a hand-computed oracle over 8 quarters") {
    // 24 months of a synthetic PPI; oracle recomputes the quarterly means and
    // the rebase scaling independently of the library path
    MonthlyInput in;
    in.start_year = 2020;
    in.start_month = 1;
    Rng rng(99);
    for (int i = 0; i < 24; ++i) in.values.push_back(80.0 + 10.0 * rng.uniform() + 0.5 * i);

    auto s = align_monthly_to_quarterly(in, {SeriesKind::Ppi, "lumber"});
    REQUIRE(s.size() == 8);
    auto r = rebase(s, {2020, 1}, 100.0);

    std::vector<double> oracle_means;
    for (int q = 0; q < 8; ++q) {
        double sum = 0;
        for (int m = 0; m < 3; ++m) sum += in.values[q * 3 + m];
        oracle_means.push_back(sum / 3.0);
    }
    for (int q = 0; q < 8; ++q) {
        double expected = 100.0 * oracle_means[q] / oracle_means[0];
        CHECK(r.values[q] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("monthly aggregation handles partial and missing quarters") {
    MonthlyInput in;
    in.start_year = 2020;
    in.start_month = 1;
    in.values = {100, 100, 100, 90, 100, 110, 1, 2, 3};
    in.observed = {true, true, true, true, true, true, false, false, false};
    auto s = align_monthly_to_quarterly(in, {SeriesKind::Ppi, "x"});
    CHECK(s.values[0] == doctest::Approx(100));
    CHECK(s.values[1] == doctest::Approx(100));
    CHECK_FALSE(s.observed[2]);

    MonthlyInput empty;
    empty.start_year = 2020;
    empty.start_month = 1;
    CHECK_THROWS_AS(align_monthly_to_quarterly(empty, {SeriesKind::Ppi, "x"}), EmptyInput);
}

TEST_CASE("cci adjustment: identity at 100 and direct arithmetic") {
    auto s = make_series(kSec, {2020, 1}, {120, 80});
    auto cci100 = make_series(kCci, {2020, 1}, {100, 100});
    auto same = cci_adjust(s, cci100);
    CHECK(same.values[0] == doctest::Approx(120));
    CHECK(same.values[1] == doctest::Approx(80));

    auto cci120 = make_series(kCci, {2020, 1}, {120, 120});
    auto adj = cci_adjust(s, cci120);
    CHECK(adj.values[0] == doctest::Approx(100.0));
}

TEST_CASE("cci adjustment round-trips") {
    Rng rng(5);
    std::vector<double> sv, cv;
    for (int i = 0; i < 20; ++i) {
        sv.push_back(std::exp(rng.normal(4.6, 0.2)));
        cv.push_back(std::exp(rng.normal(4.7, 0.1)));
    }
    auto s = make_series(kSec, {2018, 1}, sv);
    auto cci = make_series(kCci, {2018, 1}, cv);
    auto adj = cci_adjust(s, cci);
    for (size_t t = 0; t < s.size(); ++t) {
        double back = adj.values[t] * (cci.values[t] / 100.0);
        CHECK(std::fabs(back - s.values[t]) / s.values[t] < 1e-12);
    }
}

TEST_CASE("cci adjustment errors") {
    auto s = make_series(kSec, {2020, 1}, {120, 80});
    auto off = make_series(kCci, {2020, 2}, {100, 100});
    CHECK_THROWS_AS(cci_adjust(s, off), MisalignedAxis);
    auto zero = make_series(kCci, {2020, 1}, {100, 0});
    CHECK_THROWS_AS(cci_adjust(s, zero), NonPositiveCci);
}

TEST_CASE("service exclusion drops divisions 01/02 and keyword rows") {
    std::vector<CatalogRow> rows = {
        {"01", "011000", "General requirements", "overall project admin", false},
        {"06", "061100", "Wood framing", "wood framing lumber", false},
        {"03", "031000", "Concrete forms", "crew Mobilization and setup", false},
        {"02", "021000", "Existing conditions", "assessment", false},
        {"09", "097200", "Wall coverings", "vinyl sheet", false},
    };
    std::vector<std::string> taxonomy = {"mobilization", "project management",
                                         "temporary facilities"};
    auto kept = exclude_services(rows, taxonomy);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].section == "061100");
    CHECK(kept[1].section == "097200");
    CHECK(kept[0].is_material);

    // survivors + excluded partition the input, order preserved
    size_t excluded = rows.size() - kept.size();
    CHECK(excluded == 3);
    CHECK_THROWS_AS(exclude_services(rows, {}), EmptyInput);
}

TEST_CASE("exclusion keyword match is case-insensitive over title and description") {
    std::vector<CatalogRow> rows = {
        {"05", "055000", "Metal fabrications", "TEMPORARY FACILITIES for site", false},
        {"05", "055100", "Metal stairs", "steel pan stairs", false},
    };
    auto kept = exclude_services(rows, {"temporary facilities"});
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].section == "055100");
}

TEST_CASE("train/test split uses floor and keeps chronology") {
    std::vector<double> vals(78);
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = 100.0 + static_cast<double>(i);
    auto p = Panel::build({make_series(kSec, {2007, 1}, vals)});
    auto [train, test] = train_test_split(p, 0.85);
    CHECK(train.length() == 66);  // floor(78 * 0.85)
    CHECK(test.length() == 12);
    CHECK(train.last_quarter() < test.first_quarter());

    auto p20 = Panel::build({make_series(kSec, {2007, 1}, std::vector<double>(20, 1.0))});
    auto [t10a, t10b] = train_test_split(p20, 0.5);
    CHECK(t10a.length() == 10);
    CHECK(t10b.length() == 10);
}

TEST_CASE("split preserves every value") {
    Rng rng(3);
    std::vector<double> vals;
    for (int i = 0; i < 30; ++i) vals.push_back(rng.uniform(50, 150));
    auto p = Panel::build({make_series(kSec, {2010, 1}, vals)});
    auto [train, test] = train_test_split(p, 0.7);
    const auto& a = train.series()[0].values;
    const auto& b = test.series()[0].values;
    REQUIRE(a.size() + b.size() == vals.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == vals[i]);
    for (size_t i = 0; i < b.size(); ++i) CHECK(b[i] == vals[a.size() + i]);
}

TEST_CASE("locf imputation respects the two-quarter cap") {
    auto s = make_series(kSec, {2020, 1}, {10, 0, 0, 40, 50});
    s.observed[1] = s.observed[2] = false;
    Series copy = s;
    CHECK(impute_locf(copy, 2));
    CHECK(copy.values[1] == 10);
    CHECK(copy.values[2] == 10);
    CHECK_FALSE(copy.observed[1]);

    auto s3 = make_series(kSec, {2020, 1}, {10, 0, 0, 0, 50});
    s3.observed[1] = s3.observed[2] = s3.observed[3] = false;
    Series copy3 = s3;
    CHECK_FALSE(impute_locf(copy3, 2));
    CHECK(!std::isfinite(copy3.values[2]));
}

TEST_CASE("panel csv round trip is exact") {
    namespace fs = std::filesystem;
    Rng rng(11);
    std::vector<Series> series;
    series.push_back(make_series(kSec, {2019, 1}, {101.5, 103.25, 99.875, 107.0}));
    std::vector<double> odd = {1.0 / 3.0, std::sqrt(2.0), 2.718281828459045, 1e-7};
    series.push_back(make_series({SeriesKind::Ppi, "lumber"}, {2019, 1}, odd));
    auto masked = make_series({SeriesKind::Macro, "gdp"}, {2019, 1}, {1, 2, 3, 4});
    masked.observed[2] = false;
    series.push_back(masked);
    auto p = Panel::build(series);

    auto path = fs::temp_directory_path() / "mpf_roundtrip.csv";
    save_panel(p, path.string());
    auto q = load_panel(path.string());

    REQUIRE(q.count() == p.count());
    REQUIRE(q.length() == p.length());
    for (size_t si = 0; si < p.count(); ++si) {
        const auto& a = p.series()[si];
        const auto& b = q.get(a.key);
        for (size_t t = 0; t < a.size(); ++t) {
            CHECK(a.observed[t] == b.observed[t]);
            if (a.observed[t]) CHECK(a.values[t] == b.values[t]);  // bit identical
        }
    }
    fs::remove(path);
}

TEST_CASE("panel csv schema violations are located") {
    namespace fs = std::filesystem;
    auto path = fs::temp_directory_path() / "mpf_bad.csv";

    {
        std::ofstream f(path);
        f << "kind,code,quarter,value\ncsi,061100,2020Q5,100\n";
    }
    CHECK_THROWS_AS(load_panel(path.string()), SchemaError);

    {
        std::ofstream f(path);
        f << "kind,code,quarter,value\ncsi,061100,2020Q1,100\ncsi,061100,2020Q3,101\n";
    }
    CHECK_THROWS_AS(load_panel(path.string()), NonContiguousAxis);

    {
        std::ofstream f(path);
        f << "kind,code,quarter,value\ncsi,061100,2020Q1,100\ncsi,061100,2020Q1,101\n";
    }
    CHECK_THROWS_AS(load_panel(path.string()), DuplicateKey);

    {
        std::ofstream f(path);
        f << "kind,code,quarter,value\ncsi,0611,2020Q1,100\n";
    }
    CHECK_THROWS_AS(load_panel(path.string()), SchemaError);  // 6-digit rule
    fs::remove(path);
}

TEST_CASE("rebase commutes with axis truncation") {
    Rng rng(21);
    std::vector<double> vals;
    for (int i = 0; i < 16; ++i) vals.push_back(std::exp(rng.normal(4.6, 0.25)));
    auto p = Panel::build({make_series(kSec, {2018, 1}, vals)});
    Quarter cut{2020, 2};

    auto adjusted_then_sliced =
        rebase(p.get(kSec), {2018, 2}, 100.0).truncated_after(cut);
    auto sliced_then_adjusted =
        rebase(p.truncated_after(cut).get(kSec), {2018, 2}, 100.0);
    REQUIRE(adjusted_then_sliced.size() == sliced_then_adjusted.size());
    for (size_t t = 0; t < adjusted_then_sliced.size(); ++t)
        CHECK(adjusted_then_sliced.values[t] == sliced_then_adjusted.values[t]);
}

TEST_CASE("catalog and taxonomy files") {
    namespace fs = std::filesystem;
    auto cat_path = fs::temp_directory_path() / "mpf_catalog.csv";
    std::vector<CatalogRow> rows = {
        {"06", "061100", "Wood framing, dimensional", "studs, plates", false},
        {"03", "031000", "Forms \"special\"", "testing/inspection of forms", false},
    };
    save_catalog(rows, cat_path.string());
    auto back = load_catalog(cat_path.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].title == rows[0].title);
    CHECK(back[1].title == rows[1].title);

    auto tax_path = fs::temp_directory_path() / "mpf_tax.txt";
    {
        std::ofstream f(tax_path);
        f << "# service keywords\nmobilization\n  project management  \n\ntesting/inspection\n";
    }
    auto tax = load_taxonomy(tax_path.string());
    REQUIRE(tax.size() == 3);
    CHECK(tax[0] == "mobilization");
    CHECK(tax[1] == "project management");
    CHECK(tax[2] == "testing/inspection");
    fs::remove(cat_path);
    fs::remove(tax_path);
}
