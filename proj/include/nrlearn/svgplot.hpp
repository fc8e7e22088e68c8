#pragma once

#include <string>
#include <vector>

namespace nrlearn {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band_lo; // optional shaded band (same length as x)
    std::vector<double> band_hi;
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_y = false;
    double clamp_floor = 1e-16; // log-scale values at or below zero clamp here
};

struct PlotResult {
    std::string svg;
    std::vector<std::string> warnings;
};

// Static SVG line plot: one polyline per series, optional stderr band,
// legend, axes with tick labels. No display server involved.
PlotResult render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

} // namespace nrlearn
