#include "deskrl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deskrl/common.hpp"

namespace deskrl {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
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

// Heckbert's nice-number rounding to 1, 2 or 5 times a power of ten.
double nice_num(double v, bool round) {
    double exp = std::floor(std::log10(v));
    double f = v / std::pow(10.0, exp);
    double nf;
    if (round)
        nf = f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0;
    else
        nf = f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0;
    return nf * std::pow(10.0, exp);
}

std::string tick_label(double step, long k) {
    double value = step * static_cast<double>(k);
    int decimals = 0;
    if (step < 1.0) decimals = std::min(6, static_cast<int>(std::ceil(-std::log10(step) - 1e-9)));
    return num_fixed(value, decimals);
}

struct AxisScale {
    double lo, hi, step;
    long k0, k1;  // tick indices: ticks at k*step for k in [k0, k1]

    double map(double v, double px0, double px1) const {
        return px0 + (v - lo) / (hi - lo) * (px1 - px0);
    }
};

AxisScale fit_axis(double lo, double hi, int target) {
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    double step = nice_num((hi - lo) / static_cast<double>(target - 1), true);
    AxisScale s;
    s.step = step;
    s.k0 = static_cast<long>(std::floor(lo / step + 1e-9));
    s.k1 = static_cast<long>(std::ceil(hi / step - 1e-9));
    s.lo = step * static_cast<double>(s.k0);
    s.hi = step * static_cast<double>(s.k1);
    return s;
}

std::string px(double v) { return num_fixed(v, 2); }

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target) {
    if (!(lo <= hi)) throw validation_error("tick range is inverted");
    if (target < 2) throw validation_error("at least two ticks are required");
    AxisScale s = fit_axis(lo, hi, target);
    std::vector<double> out;
    for (long k = s.k0; k <= s.k1; ++k) out.push_back(s.step * static_cast<double>(k));
    return out;
}

std::string render_chart(const ChartSpec& spec, const std::vector<Series>& series) {
    if (series.empty()) throw validation_error("chart has no series");
    if (spec.width < 200 || spec.height < 150)
        throw validation_error("chart dimensions are too small");

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const Series& s : series) {
        if (s.x.size() != s.y.size())
            throw validation_error("series " + s.label + " has mismatched x and y sizes");
        if (s.x.empty()) throw validation_error("series " + s.label + " is empty");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                throw validation_error("series " + s.label + " contains non-finite values");
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
        }
    }

    AxisScale xs = fit_axis(x_min, x_max, 7);
    AxisScale ys = fit_axis(y_min, y_max, 6);
    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double w = spec.width, h = spec.height;
    auto X = [&](double v) { return xs.map(v, ml, w - mr); };
    auto Y = [&](double v) { return ys.map(v, h - mb, mt); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num_str(spec.width) +
           "\" height=\"" + num_str(spec.height) + "\" viewBox=\"0 0 " +
           num_str(spec.width) + " " + num_str(spec.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    if (!spec.title.empty())
        out += "<text x=\"" + px(w / 2) + "\" y=\"24\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"16\">" +
               xml_escape(spec.title) + "</text>\n";

    // Grid and tick labels.
    for (long k = xs.k0; k <= xs.k1; ++k) {
        double gx = X(xs.step * static_cast<double>(k));
        out += "<line x1=\"" + px(gx) + "\" y1=\"" + px(mt) + "\" x2=\"" + px(gx) +
               "\" y2=\"" + px(h - mb) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + px(gx) + "\" y=\"" + px(h - mb + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               tick_label(xs.step, k) + "</text>\n";
    }
    for (long k = ys.k0; k <= ys.k1; ++k) {
        double gy = Y(ys.step * static_cast<double>(k));
        out += "<line x1=\"" + px(ml) + "\" y1=\"" + px(gy) + "\" x2=\"" + px(w - mr) +
               "\" y2=\"" + px(gy) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + px(ml - 8) + "\" y=\"" + px(gy + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               tick_label(ys.step, k) + "</text>\n";
    }
    out += "<rect x=\"" + px(ml) + "\" y=\"" + px(mt) + "\" width=\"" + px(w - ml - mr) +
           "\" height=\"" + px(h - mt - mb) +
           "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    if (!spec.x_label.empty())
        out += "<text x=\"" + px((ml + w - mr) / 2) + "\" y=\"" + px(h - 12) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
               xml_escape(spec.x_label) + "</text>\n";
    if (!spec.y_label.empty())
        out += "<text x=\"16\" y=\"" + px((mt + h - mb) / 2) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
               "transform=\"rotate(-90 16 " + px((mt + h - mb) / 2) + ")\">" +
               xml_escape(spec.y_label) + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const Series& s = series[i];
        const char* color = kPalette[i % kPaletteSize];
        if (spec.scatter) {
            for (std::size_t j = 0; j < s.x.size(); ++j)
                out += std::string("<circle cx=\"") + px(X(s.x[j])) + "\" cy=\"" +
                       px(Y(s.y[j])) + "\" r=\"3.5\" fill=\"" + color + "\"/>\n";
        } else {
            out += std::string("<polyline fill=\"none\" stroke=\"") + color +
                   "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t j = 0; j < s.x.size(); ++j) {
                if (j) out += " ";
                out += px(X(s.x[j])) + "," + px(Y(s.y[j]));
            }
            out += "\"/>\n";
        }
    }

    // Legend, one row per labeled series, inside the top-right corner.
    double ly = mt + 14;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].label.empty()) continue;
        const char* color = kPalette[i % kPaletteSize];
        double lx = w - mr - 150;
        out += std::string("<line x1=\"") + px(lx) + "\" y1=\"" + px(ly - 4) + "\" x2=\"" +
               px(lx + 22) + "\" y2=\"" + px(ly - 4) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + px(lx + 28) + "\" y=\"" + px(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" +
               xml_escape(series[i].label) + "</text>\n";
        ly += 16;
    }

    out += "</svg>\n";
    return out;
}

}  // namespace deskrl
