#include "pscal/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pscal/common.hpp"

namespace pscal {

namespace {

constexpr int kWidth = 920, kHeight = 480;
constexpr int kLeft = 70, kRight = 160, kTop = 44, kBottom = 52;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

/// Rounds a raw interval to a 1/2/5 * 10^k tick step.
double nice_step(double span, int target_ticks) {
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    double step;
    if (r <= 1.0) step = 1.0;
    else if (r <= 2.0) step = 2.0;
    else if (r <= 5.0) step = 5.0;
    else step = 10.0;
    return step * mag;
}

std::string fmt_tick(double v) {
    // trims float noise on tick labels
    if (v == 0.0) return "0";
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace

void LinePlot::add_series(std::string name, std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size())
        throw ConfigError("plot: series '" + name + "' has mismatched lengths");
    series_.push_back({std::move(name), std::move(x), std::move(y)});
}

void LinePlot::write(const std::filesystem::path& path) const {
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series_) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) {
        ymax = ymin + (std::fabs(ymin) > 1e-12 ? 0.1 * std::fabs(ymin) : 1.0);
        ymin -= (ymax - ymin);
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return kTop + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("plot: cannot write '" + path.string() + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << esc(title_) << "</text>\n";

    // axes frame
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
        << ph << "\" fill=\"none\" stroke=\"#333\"/>\n";

    const double xstep = nice_step(xmax - xmin, 8);
    for (double v = std::ceil(xmin / xstep) * xstep; v <= xmax + 1e-12; v += xstep) {
        const double px = sx(v);
        out << "<line x1=\"" << px << "\" y1=\"" << kTop << "\" x2=\"" << px << "\" y2=\""
            << kTop + ph << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << px << "\" y=\"" << kTop + ph + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_tick(v) << "</text>\n";
    }
    const double ystep = nice_step(ymax - ymin, 6);
    for (double v = std::ceil(ymin / ystep) * ystep; v <= ymax + 1e-12; v += ystep) {
        const double py = sy(v);
        out << "<line x1=\"" << kLeft << "\" y1=\"" << py << "\" x2=\"" << kLeft + pw
            << "\" y2=\"" << py << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_tick(v) << "</text>\n";
    }
    out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << esc(xlabel_) << "</text>\n";
    out << "<text x=\"16\" y=\"" << kTop + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 16 " << kTop + ph / 2 << ")\">" << esc(ylabel_)
        << "</text>\n";

    for (std::size_t si = 0; si < series_.size(); ++si) {
        const auto& s = series_[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            out << fmt_double(std::round(sx(s.x[i]) * 100.0) / 100.0) << ','
                << fmt_double(std::round(sy(s.y[i]) * 100.0) / 100.0) << ' ';
        }
        out << "\"/>\n";
        const double ly = kTop + 16 + 18.0 * static_cast<double>(si);
        out << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << kLeft + pw + 34 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << kLeft + pw + 40 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << esc(s.name) << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw ConfigError("plot: write failed for '" + path.string() + "'");
}

} // namespace pscal
