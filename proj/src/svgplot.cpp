#include "nrlearn/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nrlearn/errors.hpp"

namespace nrlearn {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 732.0;
constexpr double kTop = 48.0;
constexpr double kBottom = 432.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string escape_xml(const std::string& text) {
    std::string out;
    for (const char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double nice_step(double raw) {
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    if (frac <= 1.0) return mag;
    if (frac <= 2.0) return 2.0 * mag;
    if (frac <= 5.0) return 5.0 * mag;
    return 10.0 * mag;
}

std::string tick_label(double v, bool log_scale) {
    std::ostringstream os;
    if (log_scale) {
        os << "1e" << static_cast<int>(std::lround(v));
    } else {
        os.precision(4);
        os << v;
    }
    return os.str();
}

} // namespace

PlotResult render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    if (series.empty()) throw ConfigError("plot: no series given");
    PlotResult result;

    // transform values, clamping nonpositives on a log axis
    auto transform_y = [&](double v, bool& clamped) {
        if (!spec.log_y) return v;
        if (v <= 0.0) {
            clamped = true;
            v = spec.clamp_floor;
        }
        return std::log10(v);
    };

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    bool clamped = false;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            throw ConfigError("plot: series '" + s.label + "' has mismatched or empty data");
        const bool banded = !s.band_lo.empty();
        if (banded && (s.band_lo.size() != s.x.size() || s.band_hi.size() != s.x.size()))
            throw ConfigError("plot: band size mismatch in series '" + s.label + "'");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            const double ty = transform_y(s.y[i], clamped);
            ymin = std::min(ymin, ty);
            ymax = std::max(ymax, ty);
            if (banded) {
                const double lo = transform_y(s.band_lo[i], clamped);
                const double hi = transform_y(s.band_hi[i], clamped);
                ymin = std::min(ymin, lo);
                ymax = std::max(ymax, hi);
            }
        }
    }
    if (clamped)
        result.warnings.push_back("log-scale values <= 0 clamped to " + num(spec.clamp_floor));
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.04 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * (kRight - kLeft); };
    auto py_t = [&](double ty) { return kBottom - (ty - ymin) / (ymax - ymin) * (kBottom - kTop); };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">"
        << escape_xml(spec.title) << "</text>\n";

    // axes frame
    svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kRight - kLeft
        << "\" height=\"" << kBottom - kTop << "\" fill=\"none\" stroke=\"black\"/>\n";

    // x ticks (linear)
    const double xstep = nice_step((xmax - xmin) / 5.0);
    for (double v = std::ceil(xmin / xstep) * xstep; v <= xmax + 1e-12 * xstep; v += xstep) {
        const double x = px(v);
        svg << "<line x1=\"" << num(x) << "\" y1=\"" << kBottom << "\" x2=\"" << num(x)
            << "\" y2=\"" << kBottom + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(x) << "\" y=\"" << kBottom + 20
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << tick_label(v, false) << "</text>\n";
    }
    // y ticks
    const double ystep = spec.log_y ? std::max(1.0, nice_step((ymax - ymin) / 5.0))
                                    : nice_step((ymax - ymin) / 5.0);
    for (double v = std::ceil(ymin / ystep) * ystep; v <= ymax + 1e-12 * ystep; v += ystep) {
        const double y = py_t(v);
        svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft
            << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << tick_label(v, spec.log_y) << "</text>\n";
    }
    svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 10
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
        << escape_xml(spec.xlabel) << "</text>\n";
    svg << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 18 "
        << (kTop + kBottom) / 2 << ")\">" << escape_xml(spec.ylabel) << "</text>\n";

    bool ignore = false;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        if (!s.band_lo.empty()) {
            svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" "
                   "points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                svg << num(px(s.x[i])) << ',' << num(py_t(transform_y(s.band_hi[i], ignore)))
                    << ' ';
            for (std::size_t i = s.x.size(); i-- > 0;)
                svg << num(px(s.x[i])) << ',' << num(py_t(transform_y(s.band_lo[i], ignore)))
                    << ' ';
            svg << "\"/>\n";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            svg << num(px(s.x[i])) << ',' << num(py_t(transform_y(s.y[i], ignore))) << ' ';
        svg << "\"/>\n";
        // legend entry
        const double ly = kTop + 16.0 + 18.0 * static_cast<double>(si);
        svg << "<line x1=\"" << kRight - 150 << "\" y1=\"" << num(ly) << "\" x2=\""
            << kRight - 120 << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << kRight - 114 << "\" y=\"" << num(ly + 4)
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << escape_xml(s.label)
            << "</text>\n";
    }
    svg << "</svg>\n";
    result.svg = svg.str();
    return result;
}

} // namespace nrlearn
