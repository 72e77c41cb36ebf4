#pragma once

#include <string>
#include <vector>

namespace deskrl {

// Native SVG line/scatter rendering for report figures. Output is fully
// deterministic: fixed layout, fixed palette, fixed-precision coordinates.

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 960;
    int height = 540;
    bool scatter = false;  // circles instead of polylines
};

// Tick positions spanning [lo, hi] at a 1/2/5 step, endpoints rounded out.
std::vector<double> nice_ticks(double lo, double hi, int target);

std::string render_chart(const ChartSpec& spec, const std::vector<Series>& series);

}  // namespace deskrl
