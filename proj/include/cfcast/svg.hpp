#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cfcast/date.hpp"
#include "cfcast/errors.hpp"
#include "cfcast/stats.hpp"

namespace cfcast::svg {

/// Fixed two-decimal coordinate formatting keeps emitted files byte-stable
/// across runs.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

/// Barebones SVG builder. No timestamps or generator metadata: identical
/// drawing calls yield identical bytes.
class Document {
public:
    Document(double width, double height) : width_(width), height_(height) {
        body_ << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
              << "\" fill=\"#ffffff\"/>\n";
    }

    void comment(std::string_view text) {
        std::string safe(text);
        size_t at;
        while ((at = safe.find("--")) != std::string::npos) safe.replace(at, 2, "- -");
        body_ << "<!-- " << safe << " -->\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0, const std::string& dash = "") {
        body_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
              << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
              << fmt(width) << "\"";
        if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
        body_ << "/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "", double opacity = 1.0) {
        body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
              << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"";
        if (opacity < 1.0) body_ << " fill-opacity=\"" << fmt(opacity) << "\"";
        if (!stroke.empty()) body_ << " stroke=\"" << stroke << "\"";
        body_ << "/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& fill) {
        body_ << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy) << "\" r=\"" << fmt(r)
              << "\" fill=\"" << fill << "\"/>\n";
    }

    void polyline(std::span<const std::pair<double, double>> points, const std::string& stroke,
                  double width = 1.5) {
        if (points.empty()) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
              << fmt(width) << "\" points=\"";
        for (const auto& [x, y] : points) body_ << fmt(x) << "," << fmt(y) << " ";
        body_ << "\"/>\n";
    }

    void polygon(std::span<const std::pair<double, double>> points, const std::string& fill,
                 double opacity) {
        if (points.empty()) return;
        body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << fmt(opacity)
              << "\" points=\"";
        for (const auto& [x, y] : points) body_ << fmt(x) << "," << fmt(y) << " ";
        body_ << "\"/>\n";
    }

    void text(double x, double y, std::string_view content, int size = 12,
              const std::string& anchor = "start", const std::string& fill = "#333333") {
        body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill
              << "\">" << escape(content) << "</text>\n";
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width_)
            << "\" height=\"" << fmt(height_) << "\" viewBox=\"0 0 " << fmt(width_) << " "
            << fmt(height_) << "\">\n";
        out << body_.str();
        out << "</svg>\n";
        return out.str();
    }

private:
    double width_, height_;
    std::ostringstream body_;
};

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

namespace detail {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!(hi > lo)) {
            lo -= 1.0;
            hi += 1.0;
        }
        const double margin = 0.05 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

// Perceptually reasonable two-ended ramp (blue -> light -> red).
inline std::string heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto lerp = [](double a, double b, double u) { return a + (b - a) * u; };
    double r, g, b;
    if (t < 0.5) {
        const double u = t / 0.5;
        r = lerp(33, 247, u);
        g = lerp(102, 247, u);
        b = lerp(172, 247, u);
    } else {
        const double u = (t - 0.5) / 0.5;
        r = lerp(247, 178, u);
        g = lerp(247, 24, u);
        b = lerp(247, 43, u);
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(r), static_cast<int>(g),
                  static_cast<int>(b));
    return buf;
}

} // namespace detail

struct LineSeries {
    std::string label;
    std::string color;
    std::vector<double> values; // NaN breaks the line
};

struct Band {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Multi-series line chart over a shared daily x axis, with an optional
/// confidence band behind the lines. The raw values are embedded as an XML
/// comment so every plot is self-describing.
inline std::string line_chart(const std::string& title, Date start,
                              std::span<const LineSeries> series,
                              const std::optional<Band>& band = std::nullopt,
                              int step_days = 1) {
    const double W = 900, H = 420;
    const double left = 70, right = 20, top = 50, bottom = 45;
    size_t n = 0;
    detail::Range range;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) range.add(v);
    }
    if (band) {
        for (double v : band->lower) range.add(v);
        for (double v : band->upper) range.add(v);
    }
    if (n == 0) throw ConfigError("line_chart: no data");
    range.pad();

    const auto x_at = [&](size_t i) {
        return n == 1 ? left : left + (W - left - right) * static_cast<double>(i) /
                                   static_cast<double>(n - 1);
    };
    const auto y_at = [&](double v) {
        return top + (H - top - bottom) * (range.hi - v) / (range.hi - range.lo);
    };

    Document doc(W, H);
    {
        std::ostringstream data;
        data << "data start=" << start.to_string();
        for (const auto& s : series) {
            data << " | " << s.label << ":";
            for (double v : s.values) data << " " << (std::isfinite(v) ? tick_label(v) : "na");
        }
        doc.comment(data.str());
    }
    doc.text(left, 22, title, 15);

    // y grid and ticks
    for (int k = 0; k <= 4; ++k) {
        const double v = range.lo + (range.hi - range.lo) * k / 4.0;
        const double y = y_at(v);
        doc.line(left, y, W - right, y, "#dddddd", 0.7);
        doc.text(left - 6, y + 4, tick_label(v), 10, "end");
    }
    // x ticks: ~6 date labels
    for (int k = 0; k <= 5; ++k) {
        const size_t i = n == 1 ? 0 : static_cast<size_t>(std::llround(
                                          static_cast<double>(n - 1) * k / 5.0));
        const double x = x_at(i);
        doc.line(x, H - bottom, x, H - bottom + 4, "#888888", 0.8);
        doc.text(x, H - bottom + 16, (start + static_cast<int>(i) * step_days).to_string(), 9,
                 "middle");
    }
    doc.line(left, H - bottom, W - right, H - bottom, "#555555", 1.0);
    doc.line(left, top, left, H - bottom, "#555555", 1.0);

    if (band && !band->lower.empty()) {
        std::vector<std::pair<double, double>> poly;
        for (size_t i = 0; i < band->upper.size(); ++i) {
            if (std::isfinite(band->upper[i])) poly.emplace_back(x_at(i), y_at(band->upper[i]));
        }
        for (size_t i = band->lower.size(); i-- > 0;) {
            if (std::isfinite(band->lower[i])) poly.emplace_back(x_at(i), y_at(band->lower[i]));
        }
        doc.polygon(poly, "#9ecae1", 0.45);
    }

    double legend_x = left + 10;
    for (const auto& s : series) {
        std::vector<std::pair<double, double>> run;
        for (size_t i = 0; i < s.values.size(); ++i) {
            if (std::isfinite(s.values[i])) {
                run.emplace_back(x_at(i), y_at(s.values[i]));
            } else if (!run.empty()) {
                doc.polyline(run, s.color);
                run.clear();
            }
        }
        doc.polyline(run, s.color);
        doc.line(legend_x, 34, legend_x + 18, 34, s.color, 2.0);
        doc.text(legend_x + 22, 38, s.label, 11);
        legend_x += 28 + 7.0 * static_cast<double>(s.label.size());
    }
    return doc.str();
}

/// One calendar year as a week-by-weekday grid; darker red means a higher
/// value. Missing days are grey.
inline std::string calendar_heatmap(const std::string& title, int year,
                                    std::span<const double> values_by_doy) {
    const Date jan1(year, 1, 1);
    const Date dec31(year, 12, 31);
    const int days = dec31 - jan1 + 1;
    detail::Range range;
    for (double v : values_by_doy) range.add(v);
    const bool flat = !(range.hi > range.lo);

    const double cell = 13, gap = 2;
    const double left = 40, top = 60;
    const int lead = jan1.day_of_week(); // 0=Sunday column offset
    const int weeks = (lead + days + 6) / 7;
    const double W = left + weeks * (cell + gap) + 20;
    const double H = top + 7 * (cell + gap) + 40;

    Document doc(W, H);
    doc.text(left, 24, title, 15);
    doc.text(left, 42,
             flat ? "single value: " + tick_label(range.lo)
                  : "range: " + tick_label(range.lo) + " to " + tick_label(range.hi),
             11);
    const char* dow_names[7] = {"Su", "Mo", "Tu", "We", "Th", "Fr", "Sa"};
    for (int r = 0; r < 7; ++r) {
        doc.text(left - 8, top + r * (cell + gap) + cell - 2, dow_names[r], 9, "end");
    }
    int last_month = 0;
    for (int d = 0; d < days; ++d) {
        const Date date = jan1 + d;
        const int slot = lead + d;
        const int week = slot / 7;
        const int dow = slot % 7;
        const double x = left + week * (cell + gap);
        const double y = top + dow * (cell + gap);
        std::string fill = "#e0e0e0";
        const double v = d < static_cast<int>(values_by_doy.size())
                             ? values_by_doy[d]
                             : std::numeric_limits<double>::quiet_NaN();
        if (std::isfinite(v)) {
            fill = flat ? detail::heat_color(0.5)
                        : detail::heat_color((v - range.lo) / (range.hi - range.lo));
        }
        doc.rect(x, y, cell, cell, fill);
        if (static_cast<int>(date.month()) != last_month) {
            last_month = static_cast<int>(date.month());
            doc.text(x, top - 6, std::to_string(last_month), 9);
        }
    }
    return doc.str();
}

/// Horizontal bar chart of labelled non-negative values.
inline std::string bar_chart(const std::string& title,
                             std::span<const std::pair<std::string, double>> bars) {
    const double W = 640;
    const double left = 110, right = 70, top = 50;
    const double bar_h = 22, gap = 10;
    const double H = top + static_cast<double>(bars.size()) * (bar_h + gap) + 24;
    double vmax = 0.0;
    for (const auto& [name, v] : bars) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;

    Document doc(W, H);
    doc.text(left, 24, title, 15);
    {
        std::ostringstream data;
        data << "data";
        for (const auto& [name, v] : bars) data << " " << name << "=" << tick_label(v);
        doc.comment(data.str());
    }
    double y = top;
    for (const auto& [name, v] : bars) {
        const double w = (W - left - right) * v / vmax;
        doc.text(left - 8, y + bar_h - 6, name, 11, "end");
        doc.rect(left, y, w, bar_h, "#4682b4");
        doc.text(left + w + 6, y + bar_h - 6, tick_label(v), 10);
        y += bar_h + gap;
    }
    return doc.str();
}

struct BoxGroup {
    std::string label;
    BoxStats observed;
    BoxStats predicted;
};

/// Paired observed/predicted box plots per group (Tukey hinges, 1.5 IQR
/// whiskers, dots for outliers).
inline std::string box_plot(const std::string& title, std::span<const BoxGroup> groups) {
    const double W = std::max(420.0, 130.0 + 110.0 * static_cast<double>(groups.size()));
    const double H = 420;
    const double left = 70, right = 20, top = 60, bottom = 45;
    detail::Range range;
    for (const auto& g : groups) {
        for (const auto* b : {&g.observed, &g.predicted}) {
            range.add(b->whisker_low);
            range.add(b->whisker_high);
            for (double v : b->outliers) range.add(v);
        }
    }
    range.pad();
    const auto y_at = [&](double v) {
        return top + (H - top - bottom) * (range.hi - v) / (range.hi - range.lo);
    };

    Document doc(W, H);
    doc.text(left, 24, title, 15);
    doc.line(left + 10, 38, left + 28, 38, "#444444", 8.0);
    doc.text(left + 34, 42, "observed", 11);
    doc.line(left + 120, 38, left + 138, 38, "#d95f02", 8.0);
    doc.text(left + 144, 42, "predicted", 11);

    for (int k = 0; k <= 4; ++k) {
        const double v = range.lo + (range.hi - range.lo) * k / 4.0;
        doc.line(left, y_at(v), W - right, y_at(v), "#dddddd", 0.7);
        doc.text(left - 6, y_at(v) + 4, tick_label(v), 10, "end");
    }

    const double slot = (W - left - right) / std::max<size_t>(1, groups.size());
    const double box_w = std::min(34.0, slot / 3.0);
    double x0 = left;
    for (const auto& g : groups) {
        const double cx_obs = x0 + slot / 2.0 - box_w * 0.75;
        const double cx_pred = x0 + slot / 2.0 + box_w * 0.75;
        const auto draw = [&](const BoxStats& b, double cx, const std::string& color) {
            doc.line(cx, y_at(b.whisker_low), cx, y_at(b.q1), color, 1.2);
            doc.line(cx, y_at(b.q3), cx, y_at(b.whisker_high), color, 1.2);
            doc.line(cx - box_w / 4, y_at(b.whisker_low), cx + box_w / 4, y_at(b.whisker_low),
                     color, 1.2);
            doc.line(cx - box_w / 4, y_at(b.whisker_high), cx + box_w / 4, y_at(b.whisker_high),
                     color, 1.2);
            doc.rect(cx - box_w / 2, y_at(b.q3), box_w, y_at(b.q1) - y_at(b.q3), "#ffffff",
                     color);
            doc.line(cx - box_w / 2, y_at(b.median), cx + box_w / 2, y_at(b.median), color, 2.0);
            for (double v : b.outliers) doc.circle(cx, y_at(v), 2.0, color);
        };
        draw(g.observed, cx_obs, "#444444");
        draw(g.predicted, cx_pred, "#d95f02");
        doc.text(x0 + slot / 2.0, H - bottom + 16, g.label, 10, "middle");
        x0 += slot;
    }
    doc.line(left, H - bottom, W - right, H - bottom, "#555555", 1.0);
    doc.line(left, top, left, H - bottom, "#555555", 1.0);
    return doc.str();
}

} // namespace cfcast::svg
