#pragma once

// Minimal SVG line charts, written directly by the runner so reports carry
// no plotting dependency.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace groklab {

struct SvgSeries {
    std::string label;
    std::vector<double> xs, ys;
    std::string color = "#1f77b4";
    bool dashed = false;
    bool markers = false;
};

class LineChart {
public:
    LineChart(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add(SvgSeries s) {
        if (s.xs.size() != s.ys.size())
            throw std::invalid_argument("LineChart: series length mismatch");
        series_.push_back(std::move(s));
    }

    // Dashed horizontal reference line across the x range.
    void add_hline(double y, const std::string& label, const std::string& color = "#d62728") {
        hlines_.push_back({y, label, color});
    }

    bool empty() const { return series_.empty(); }

    std::string render() const {
        const double w = 640, h = 400;
        const double ml = 64, mr = 16, mt = 32, mb = 44;
        double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
        bool first = true;
        for (const auto& s : series_) {
            for (size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
                if (first) {
                    x0 = x1 = s.xs[i];
                    y0 = y1 = s.ys[i];
                    first = false;
                } else {
                    x0 = std::min(x0, s.xs[i]);
                    x1 = std::max(x1, s.xs[i]);
                    y0 = std::min(y0, s.ys[i]);
                    y1 = std::max(y1, s.ys[i]);
                }
            }
        }
        for (const auto& hl : hlines_) {
            if (first) {
                y0 = y1 = hl.y;
            } else {
                y0 = std::min(y0, hl.y);
                y1 = std::max(y1, hl.y);
            }
        }
        if (x1 - x0 < 1e-12) {
            x0 -= 1;
            x1 += 1;
        }
        if (y1 - y0 < 1e-12) {
            y0 -= 1;
            y1 += 1;
        }
        double ypad = 0.05 * (y1 - y0);
        y0 -= ypad;
        y1 += ypad;
        auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
        auto py = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };

        std::string out;
        out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" +
               fmt(h) + "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\">\n";
        out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out += text(w / 2, 18, title_, 14, "middle");
        out += text(w / 2, h - 8, x_label_, 12, "middle");
        out += "<g transform=\"translate(14," + fmt(h / 2) + ") rotate(-90)\">" +
               text(0, 0, y_label_, 12, "middle") + "</g>\n";
        // axes
        out += line(ml, h - mb, w - mr, h - mb, "#333", 1, false);
        out += line(ml, mt, ml, h - mb, "#333", 1, false);
        // ticks
        for (int i = 0; i <= 4; ++i) {
            double xv = x0 + (x1 - x0) * i / 4.0;
            double yv = y0 + (y1 - y0) * i / 4.0;
            out += line(px(xv), h - mb, px(xv), h - mb + 4, "#333", 1, false);
            out += text(px(xv), h - mb + 16, fmt(xv), 10, "middle");
            out += line(ml - 4, py(yv), ml, py(yv), "#333", 1, false);
            out += text(ml - 6, py(yv) + 3, fmt(yv), 10, "end");
        }
        for (const auto& hl : hlines_) {
            out += line(ml, py(hl.y), w - mr, py(hl.y), hl.color, 1.2, true);
        }
        for (const auto& s : series_) {
            std::string pts;
            for (size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
                pts += fmt(px(s.xs[i])) + "," + fmt(py(s.ys[i])) + " ";
            }
            out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.6\"";
            if (s.dashed) out += " stroke-dasharray=\"6 4\"";
            out += " points=\"" + pts + "\"/>\n";
            if (s.markers) {
                for (size_t i = 0; i < s.xs.size(); ++i) {
                    out += "<circle cx=\"" + fmt(px(s.xs[i])) + "\" cy=\"" + fmt(py(s.ys[i])) +
                           "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
                }
            }
        }
        // legend
        double ly = mt + 6;
        for (const auto& s : series_) {
            out += line(w - mr - 120, ly, w - mr - 96, ly, s.color, 1.6, s.dashed);
            out += text(w - mr - 90, ly + 3, s.label, 10, "start");
            ly += 14;
        }
        for (const auto& hl : hlines_) {
            out += line(w - mr - 120, ly, w - mr - 96, ly, hl.color, 1.2, true);
            out += text(w - mr - 90, ly + 3, hl.label, 10, "start");
            ly += 14;
        }
        out += "</svg>\n";
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("LineChart::write: cannot open " + path);
        f << render();
    }

private:
    struct HLine {
        double y;
        std::string label;
        std::string color;
    };

    static std::string fmt(double v) {
        char buf[40];
        snprintf(buf, sizeof(buf), "%.6g", v);
        return buf;
    }

    static std::string text(double x, double y, const std::string& s, int size,
                            const std::string& anchor) {
        return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" +
               std::to_string(size) + "\" font-family=\"sans-serif\" text-anchor=\"" + anchor +
               "\">" + escape(s) + "</text>\n";
    }

    static std::string line(double x1, double y1, double x2, double y2, const std::string& color,
                            double width, bool dashed) {
        std::string out = "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) +
                          "\" y2=\"" + fmt(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" +
                          fmt(width) + "\"";
        if (dashed) out += " stroke-dasharray=\"6 4\"";
        return out + "/>\n";
    }

    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '&') out += "&amp;";
            else if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else out += c;
        }
        return out;
    }

    std::string title_, x_label_, y_label_;
    std::vector<SvgSeries> series_;
    std::vector<HLine> hlines_;
};

}  // namespace groklab
