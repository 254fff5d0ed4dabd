#pragma once

#include <string>
#include <vector>

namespace rocgan {

enum class PlotKind { curve, histogram, manifold3d };

PlotKind parse_plot_kind(const std::string& s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws FormatError if absent
    bool has_column(const std::string& name) const;
    double number(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

// Deterministic SVG documents. A malformed table throws FormatError.
//   curve:      first column is x; every other numeric column is a series.
//   histogram:  20 rows of bin_lo, bin_hi, then one or more count columns.
//   manifold3d: x, y, target_k, baseline_k, ours_k for k = 0..3, one panel per k.
std::string render_svg(const CsvTable& table, PlotKind kind, const std::string& title = "");
void plot_csv(const std::string& csv_path, PlotKind kind, const std::string& svg_path);

}  // namespace rocgan
