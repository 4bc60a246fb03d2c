#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "sdkit/error.hpp"
#include "sdkit/io.hpp"

namespace sdkit::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> ticks;
};

inline constexpr int kMaxTicks = 8;

/// Axis over the data extent [min, max] with a 5% margin on each side. A
/// zero-width extent becomes [v - 1, v + 1]. Ticks sit on multiples of the
/// smallest 1/2/2.5/5 x 10^k step that yields at most kMaxTicks of them.
inline Axis make_axis(double min, double max) {
    Axis a;
    if (max - min == 0.0) {
        a.lo = min - 1.0;
        a.hi = max + 1.0;
    } else {
        const double margin = 0.05 * (max - min);
        a.lo = min - margin;
        a.hi = max + margin;
    }
    const double span = a.hi - a.lo;
    double step = std::pow(10.0, std::floor(std::log10(span / kMaxTicks)));
    static constexpr double factors[] = {1.0, 2.0, 2.5, 5.0, 10.0};
    for (int guard = 0; guard < 8; ++guard) {
        for (double f : factors) {
            const double s = step * f;
            const double first = std::ceil(a.lo / s);
            const double last = std::floor(a.hi / s);
            if (last - first + 1 <= kMaxTicks) {
                for (double k = first; k <= last; k += 1.0) {
                    const double v = k * s;
                    a.ticks.push_back(v == 0.0 ? 0.0 : v);
                }
                return a;
            }
        }
        step *= 10.0;
    }
    return a;
}

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace detail

/// Renders a line chart. `lines` are drawn as polylines and `markers` as
/// circles; both get legend entries. Throws Error when `lines` is empty.
inline std::string render_chart(const std::vector<Series>& lines, const std::vector<Series>& markers,
                                const std::string& title, const std::string& x_label = "t") {
    if (lines.empty()) throw Error("chart needs at least one series");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto* group : {&lines, &markers})
        for (const auto& s : *group)
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
    if (!std::isfinite(xmin)) xmin = xmax = ymin = ymax = 0.0;
    const Axis ax = make_axis(xmin, xmax);
    const Axis ay = make_axis(ymin, ymax);

    constexpr double width = 720, height = 440, left = 70, right = 170, top = 40, bottom = 50;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
    auto py = [&](double y) { return top + ph - (y - ay.lo) / (ay.hi - ay.lo) * ph; };
    using detail::num;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           detail::escape(title) + "</text>\n";
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<g class=\"x-ticks\">\n";
    for (double t : ax.ticks) {
        out += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
               num(top + ph + 5) + "\" stroke=\"black\"/>";
        out += "<text x=\"" + num(px(t)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" +
               detail::tick_label(t) + "</text>\n";
    }
    out += "</g>\n<g class=\"y-ticks\">\n";
    for (double t : ay.ticks) {
        out += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left) + "\" y2=\"" +
               num(py(t)) + "\" stroke=\"black\"/>";
        out += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" +
               detail::tick_label(t) + "</text>\n";
    }
    out += "</g>\n";
    out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(height - 10) + "\" text-anchor=\"middle\">" +
           detail::escape(x_label) + "</text>\n";

    std::size_t color = 0;
    std::string legend;
    double legend_y = top + 10;
    auto legend_entry = [&](const std::string& name, const char* col, bool marker) {
        legend += "<g class=\"legend-entry\">";
        if (marker)
            legend += "<circle cx=\"" + num(left + pw + 25) + "\" cy=\"" + num(legend_y) + "\" r=\"3\" fill=\"" + col + "\"/>";
        else
            legend += "<line x1=\"" + num(left + pw + 15) + "\" y1=\"" + num(legend_y) + "\" x2=\"" + num(left + pw + 35) +
                      "\" y2=\"" + num(legend_y) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>";
        legend += "<text x=\"" + num(left + pw + 42) + "\" y=\"" + num(legend_y + 4) + "\">" + detail::escape(name) +
                  "</text></g>\n";
        legend_y += 18;
    };
    for (const auto& s : lines) {
        const char* col = detail::kPalette[color++ % std::size(detail::kPalette)];
        out += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (i) out += ' ';
            out += num(px(s.x[i])) + "," + num(py(s.y[i]));
        }
        out += "\"/>\n";
        legend_entry(s.name, col, false);
    }
    for (const auto& s : markers) {
        const char* col = detail::kPalette[color++ % std::size(detail::kPalette)];
        out += "<g class=\"markers\" fill=\"" + std::string(col) + "\">\n";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\"/>\n";
        out += "</g>\n";
        legend_entry(s.name, col, true);
    }
    out += legend;
    out += "</svg>\n";
    return out;
}

inline void emit_svg(const std::vector<Series>& lines, const std::vector<Series>& markers, const std::string& title,
                     const std::filesystem::path& path) {
    write_text_file(path, render_chart(lines, markers, title));
}

}  // namespace sdkit::svg
