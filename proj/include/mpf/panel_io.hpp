#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpf/series.hpp"

namespace mpf {

// JSON metadata sidecar written next to a panel CSV.
struct PanelMeta {
    Quarter base{2007, 1};
    bool cci_adjusted = false;
    int excluded_rows = 0;
    int kept_rows = 0;
};

// Long-format panel CSV, header exactly `kind,code,quarter,value`.
// Missing values are absent rows; a quarter absent from every series is a
// gap and rejects the file (NonContiguousAxis). Values are written with 17
// significant digits so load(save(p)) is bit-identical.
Panel load_panel(const std::string& path);
void save_panel(const Panel& p, const std::string& path);

std::string meta_sidecar_path(const std::string& panel_path);
void save_panel_meta(const PanelMeta& meta, const std::string& path);
std::optional<PanelMeta> load_panel_meta(const std::string& path);

// Catalog CSV, header `division,section,title,description`; quoted fields
// with embedded commas/quotes are supported.
std::vector<CatalogRow> load_catalog(const std::string& path);
void save_catalog(const std::vector<CatalogRow>& rows, const std::string& path);

// One keyword per line, '#' starts a comment, blank lines skipped.
std::vector<std::string> load_taxonomy(const std::string& path);

// shared CSV helpers (used by other modules' exports)
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_quote(const std::string& field);
std::string format_double(double v);  // round-trip exact, shortest of %.17g

}  // namespace mpf
