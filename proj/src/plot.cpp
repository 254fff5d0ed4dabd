#include "rocgan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "rocgan/errors.hpp"

namespace rocgan {

PlotKind parse_plot_kind(const std::string& s) {
    if (s == "curve") return PlotKind::curve;
    if (s == "histogram") return PlotKind::histogram;
    if (s == "manifold3d") return PlotKind::manifold3d;
    throw ContractError("unknown plot kind '" + s + "' (curve, histogram, manifold3d)");
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw FormatError("CSV has no column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string& cell = rows.at(row).at(col);
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw FormatError("row " + std::to_string(row + 1) + ", column '" + header.at(col) + "' is not a number: '" +
                          cell + "'");
    }
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw FormatError("CSV row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                              " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw FormatError("CSV is empty");
    return t;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kWidth = 960, kHeight = 540;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Target / baseline / ours are drawn green / red / blue.
std::string series_color(const std::string& name, std::size_t index) {
    if (name.rfind("target", 0) == 0) return "#2ca02c";
    if (name.rfind("baseline", 0) == 0 || name == "cgan") return "#d62728";
    if (name.rfind("ours", 0) == 0 || name == "rocgan") return "#1f77b4";
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[index % 8];
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
    double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

struct Frame {
    double x0, y0, x1, y1;  // plot area, y0 at top
};

void axes(std::ostringstream& o, const Frame& f, const Range& xr, const Range& yr, const std::string& xlabel) {
    o << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.x1 - f.x0) << "\" height=\""
      << num(f.y1 - f.y0) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double t = i / 4.0;
        const double xv = xr.lo + t * (xr.hi - xr.lo), yv = yr.lo + t * (yr.hi - yr.lo);
        const double px = f.x0 + t * (f.x1 - f.x0), py = f.y1 - t * (f.y1 - f.y0);
        o << "<text x=\"" << num(px) << "\" y=\"" << num(f.y1 + 16) << "\" font-size=\"11\" text-anchor=\"middle\">"
          << label(xv) << "</text>\n";
        o << "<text x=\"" << num(f.x0 - 6) << "\" y=\"" << num(py + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
          << label(yv) << "</text>\n";
    }
    o << "<text x=\"" << num((f.x0 + f.x1) / 2) << "\" y=\"" << num(f.y1 + 34)
      << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
}

std::string header(const std::string& title) {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
      << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        o << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">" << escape(title)
          << "</text>\n";
    return o.str();
}

void legend(std::ostringstream& o, const std::vector<std::string>& names, double x, double y) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double yy = y + 16.0 * static_cast<double>(i);
        o << "<rect x=\"" << num(x) << "\" y=\"" << num(yy - 9) << "\" width=\"10\" height=\"10\" fill=\""
          << series_color(names[i], i) << "\"/>\n";
        o << "<text x=\"" << num(x + 14) << "\" y=\"" << num(yy) << "\" font-size=\"11\">" << escape(names[i])
          << "</text>\n";
    }
}

std::string render_curve(const CsvTable& t, const std::string& title) {
    if (t.header.size() < 2) throw FormatError("curve needs an x column and at least one series");
    if (t.rows.empty()) throw FormatError("curve needs at least one row");
    Range xr, yr;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        xr.add(t.number(r, 0));
        for (std::size_t c = 1; c < t.header.size(); ++c) yr.add(t.number(r, c));
    }
    xr.finish();
    yr.finish();
    const Frame f{80, 50, kWidth - 200, kHeight - 60};
    std::ostringstream o;
    o << header(title);
    axes(o, f, xr, yr, t.header[0]);
    std::vector<std::string> names(t.header.begin() + 1, t.header.end());
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        std::ostringstream pts;
        bool any = false;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double x = t.number(r, 0), y = t.number(r, c);
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            pts << (any ? " " : "") << num(xr.map(x, f.x0, f.x1)) << ',' << num(yr.map(y, f.y1, f.y0));
            any = true;
        }
        if (any)
            o << "<polyline class=\"series\" fill=\"none\" stroke-width=\"1.5\" stroke=\""
              << series_color(t.header[c], c - 1) << "\" points=\"" << pts.str() << "\"/>\n";
    }
    legend(o, names, f.x1 + 16, f.y0 + 10);
    o << "</svg>\n";
    return o.str();
}

std::string render_histogram(const CsvTable& t, const std::string& title) {
    if (t.header.size() < 3 || t.header[0] != "bin_lo" || t.header[1] != "bin_hi")
        throw FormatError("histogram CSV must start with bin_lo,bin_hi and have count columns");
    if (t.rows.size() != 20) throw FormatError("histogram CSV must have 20 bins, got " + std::to_string(t.rows.size()));
    Range xr, yr;
    yr.add(0.0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        xr.add(t.number(r, 0));
        xr.add(t.number(r, 1));
        for (std::size_t c = 2; c < t.header.size(); ++c) yr.add(t.number(r, c));
    }
    xr.finish();
    yr.finish();
    const Frame f{80, 50, kWidth - 200, kHeight - 60};
    std::ostringstream o;
    o << header(title);
    axes(o, f, xr, yr, "value");
    const std::size_t series = t.header.size() - 2;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double a = xr.map(t.number(r, 0), f.x0, f.x1), b = xr.map(t.number(r, 1), f.x0, f.x1);
        const double w = (b - a) / static_cast<double>(series);
        for (std::size_t s = 0; s < series; ++s) {
            const double y = yr.map(t.number(r, s + 2), f.y1, f.y0);
            o << "<rect class=\"bin\" x=\"" << num(a + w * static_cast<double>(s)) << "\" y=\"" << num(y)
              << "\" width=\"" << num(std::max(w - 1.0, 0.5)) << "\" height=\"" << num(f.y1 - y) << "\" fill=\""
              << series_color(t.header[s + 2], s) << "\" fill-opacity=\"0.8\"/>\n";
        }
    }
    legend(o, std::vector<std::string>(t.header.begin() + 2, t.header.end()), f.x1 + 16, f.y0 + 10);
    o << "</svg>\n";
    return o.str();
}

std::string render_manifold(const CsvTable& t, const std::string& title) {
    const std::size_t cx = t.column("x"), cy = t.column("y");
    const char* groups[] = {"target", "baseline", "ours"};
    const double pw = kWidth / 2, ph = (kHeight - 30) / 2;
    std::ostringstream o;
    o << header(title);
    // At most ~600 points per series keeps the document small; the stride is data-independent.
    const std::size_t stride = std::max<std::size_t>(1, t.rows.size() / 600);
    for (std::size_t k = 0; k < 4; ++k) {
        const double ox = pw * static_cast<double>(k % 2), oy = 30 + ph * static_cast<double>(k / 2);
        // Outputs 0 and 2 depend on (x, y); 1 and 3 on x alone.
        const bool xyz = k % 2 == 0;
        Range zr, ur, vr;
        std::vector<std::size_t> cols;
        for (const char* g : groups) cols.push_back(t.column(std::string(g) + "_" + std::to_string(k)));
        auto project = [&](double x, double y, double z) {
            return xyz ? std::pair{x + 0.45 * y, z + 0.3 * y} : std::pair{x, z};
        };
        for (std::size_t r = 0; r < t.rows.size(); r += stride)
            for (auto c : cols) {
                const auto [u, v] = project(t.number(r, cx), t.number(r, cy), t.number(r, c));
                ur.add(u);
                vr.add(v);
            }
        ur.finish();
        vr.finish();
        const Frame f{ox + 50, oy + 20, ox + pw - 20, oy + ph - 40};
        o << "<g class=\"panel\">\n";
        axes(o, f, ur, vr, xyz ? "x (+ depth y)" : "x");
        o << "<text x=\"" << num((f.x0 + f.x1) / 2) << "\" y=\"" << num(f.y0 - 6)
          << "\" font-size=\"12\" text-anchor=\"middle\">output " << k << "</text>\n";
        for (std::size_t g = 0; g < 3; ++g) {
            const std::string color = series_color(groups[g], g);
            for (std::size_t r = 0; r < t.rows.size(); r += stride) {
                const auto [u, v] = project(t.number(r, cx), t.number(r, cy), t.number(r, cols[g]));
                if (!std::isfinite(u) || !std::isfinite(v)) continue;
                o << "<circle cx=\"" << num(ur.map(u, f.x0, f.x1)) << "\" cy=\"" << num(vr.map(v, f.y1, f.y0))
                  << "\" r=\"1.3\" fill=\"" << color << "\"/>\n";
            }
        }
        o << "</g>\n";
    }
    legend(o, {"target", "baseline", "ours"}, 12, 14);
    o << "</svg>\n";
    return o.str();
}

}  // namespace

std::string render_svg(const CsvTable& table, PlotKind kind, const std::string& title) {
    switch (kind) {
        case PlotKind::curve: return render_curve(table, title);
        case PlotKind::histogram: return render_histogram(table, title);
        case PlotKind::manifold3d: return render_manifold(table, title);
    }
    return {};
}

void plot_csv(const std::string& csv_path, PlotKind kind, const std::string& svg_path) {
    const CsvTable t = read_csv(csv_path);
    const std::string svg = render_svg(t, kind);
    std::ofstream f(svg_path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + svg_path);
    f << svg;
}

}  // namespace rocgan
