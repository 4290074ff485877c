#include "ropo/plot.hpp"

#include "ropo/errors.hpp"
#include "ropo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ropo {

const char* to_string(PlotQuantity quantity) {
    switch (quantity) {
    case PlotQuantity::eval_return: return "eval_return";
    case PlotQuantity::cumulative_regret: return "cumulative_regret";
    case PlotQuantity::robust_value: return "robust_value";
    case PlotQuantity::v_hat: return "v_hat";
    }
    return "?";
}

PlotQuantity plot_quantity_from_string(const std::string& name) {
    for (auto q : {PlotQuantity::eval_return, PlotQuantity::cumulative_regret,
                   PlotQuantity::robust_value, PlotQuantity::v_hat})
        if (name == to_string(q)) return q;
    throw ConfigError("unknown plot quantity '" + name +
                      "' (expected eval_return, cumulative_regret, robust_value or v_hat)");
}

PlotSeries series_from_aggregate(const std::string& label, const std::vector<AggregateRow>& rows,
                                 PlotQuantity quantity) {
    PlotSeries series{label, {}, {}, {}};
    for (const auto& r : rows) {
        series.x.push_back(static_cast<double>(r.episode));
        switch (quantity) {
        case PlotQuantity::eval_return:
            series.mean.push_back(r.eval_return_mean);
            series.std.push_back(r.eval_return_std);
            break;
        case PlotQuantity::cumulative_regret:
            series.mean.push_back(r.cumulative_regret_mean);
            series.std.push_back(r.cumulative_regret_std);
            break;
        case PlotQuantity::robust_value:
            series.mean.push_back(r.robust_value_mean);
            series.std.push_back(r.robust_value_std);
            break;
        case PlotQuantity::v_hat:
            series.mean.push_back(r.v_hat_mean);
            series.std.push_back(r.v_hat_std);
            break;
        }
    }
    return series;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr double kMarginLeft = 60.0;
constexpr double kMarginRight = 16.0;
constexpr double kMarginTop = 34.0;
constexpr double kMarginBottom = 46.0;

std::string num(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", std::abs(v) < 5e-3 ? 0.0 : v);
    return buffer;
}

std::string tick_label(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buffer;
}

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

double nice_step(double span) {
    const double raw = span / 5.0;
    const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / magnitude;
    return magnitude * (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0);
}

struct Range {
    double lo = 0.0, hi = 0.0;

    void widen_if_flat() {
        if (hi - lo < 1e-12) {
            const double pad = std::max(std::abs(lo) * 0.1, 0.5);
            lo -= pad;
            hi += pad;
        }
    }
};

void check_series(const PlotSeries& s) {
    if (s.x.size() != s.mean.size() || (!s.std.empty() && s.std.size() != s.x.size()))
        throw ConfigError("plot series '" + s.label + "' has mismatched column lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i)
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.mean[i]) ||
            (!s.std.empty() && !std::isfinite(s.std[i])))
            throw ConfigError("plot series '" + s.label + "' contains non-finite values");
}

} // namespace

std::string render_svg(const std::vector<PlotPanel>& panels, const PlotOptions& options) {
    std::size_t points = 0;
    for (const auto& panel : panels)
        for (const auto& s : panel.series) {
            check_series(s);
            points += s.x.size();
        }
    if (panels.empty() || points == 0) throw ConfigError("nothing to plot: empty input");

    const double cell_w = options.panel_width + kMarginLeft + kMarginRight;
    const double cell_h = options.panel_height + kMarginTop + kMarginBottom;
    const double legend_h = 24.0;
    const double total_w = cell_w * static_cast<double>(panels.size());
    const double total_h = cell_h + legend_h;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(total_w) + "\" height=\"" +
           num(total_h) + "\" viewBox=\"0 0 " + num(total_w) + " " + num(total_h) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    std::vector<std::string> labels;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const PlotPanel& panel = panels[p];
        Range xr{1e300, -1e300};
        Range yr{1e300, -1e300};
        for (const auto& s : panel.series)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                const double band = s.std.empty() ? 0.0 : s.std[i];
                xr.lo = std::min(xr.lo, s.x[i]);
                xr.hi = std::max(xr.hi, s.x[i]);
                yr.lo = std::min(yr.lo, s.mean[i] - band);
                yr.hi = std::max(yr.hi, s.mean[i] + band);
            }
        if (xr.lo > xr.hi) xr = {0.0, 1.0};
        if (yr.lo > yr.hi) yr = {0.0, 1.0};
        xr.widen_if_flat();
        yr.widen_if_flat();

        const double ox = cell_w * static_cast<double>(p) + kMarginLeft;
        const double oy = kMarginTop;
        const double w = options.panel_width;
        const double h = options.panel_height;
        auto sx = [&](double x) { return ox + (x - xr.lo) / (xr.hi - xr.lo) * w; };
        auto sy = [&](double y) { return oy + h - (y - yr.lo) / (yr.hi - yr.lo) * h; };

        svg += "<g>\n";
        svg += "<text x=\"" + num(ox + w / 2) + "\" y=\"" + num(oy - 12) +
               "\" text-anchor=\"middle\" font-size=\"13\">" + escape(panel.title) + "</text>\n";
        svg += "<rect x=\"" + num(ox) + "\" y=\"" + num(oy) + "\" width=\"" + num(w) + "\" height=\"" +
               num(h) + "\" fill=\"none\" stroke=\"#444\"/>\n";

        for (int axis = 0; axis < 2; ++axis) {
            const Range& r = axis == 0 ? xr : yr;
            const double step = nice_step(r.hi - r.lo);
            for (double t = std::ceil(r.lo / step) * step; t <= r.hi + step * 1e-9; t += step) {
                if (axis == 0) {
                    svg += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(oy + h) + "\" x2=\"" +
                           num(sx(t)) + "\" y2=\"" + num(oy + h + 4) + "\" stroke=\"#444\"/>\n";
                    svg += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(oy + h + 16) +
                           "\" text-anchor=\"middle\">" + tick_label(t) + "</text>\n";
                } else {
                    svg += "<line x1=\"" + num(ox - 4) + "\" y1=\"" + num(sy(t)) + "\" x2=\"" + num(ox) +
                           "\" y2=\"" + num(sy(t)) + "\" stroke=\"#444\"/>\n";
                    svg += "<text x=\"" + num(ox - 6) + "\" y=\"" + num(sy(t) + 4) +
                           "\" text-anchor=\"end\">" + tick_label(t) + "</text>\n";
                }
            }
        }
        svg += "<text x=\"" + num(ox + w / 2) + "\" y=\"" + num(oy + h + 34) +
               "\" text-anchor=\"middle\">" + escape(options.x_label) + "</text>\n";
        svg += "<text transform=\"translate(" + num(ox - 44) + " " + num(oy + h / 2) +
               ") rotate(-90)\" text-anchor=\"middle\">" + escape(options.y_label) + "</text>\n";

        for (std::size_t si = 0; si < panel.series.size(); ++si) {
            const PlotSeries& s = panel.series[si];
            auto it = std::find(labels.begin(), labels.end(), s.label);
            if (it == labels.end()) it = labels.insert(labels.end(), s.label);
            const char* color = kPalette[static_cast<std::size_t>(it - labels.begin()) % std::size(kPalette)];
            if (s.x.empty()) continue;

            if (!s.std.empty() && s.x.size() > 1) {
                std::string band;
                for (std::size_t i = 0; i < s.x.size(); ++i)
                    band += num(sx(s.x[i])) + "," + num(sy(s.mean[i] + s.std[i])) + " ";
                for (std::size_t i = s.x.size(); i-- > 0;)
                    band += num(sx(s.x[i])) + "," + num(sy(s.mean[i] - s.std[i])) + " ";
                band.pop_back();
                svg += "<polygon points=\"" + band + "\" fill=\"" + color +
                       "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
            }
            if (s.x.size() == 1) {
                svg += "<circle cx=\"" + num(sx(s.x[0])) + "\" cy=\"" + num(sy(s.mean[0])) +
                       "\" r=\"3\" fill=\"" + color + "\"/>\n";
                continue;
            }
            std::string line;
            for (std::size_t i = 0; i < s.x.size(); ++i)
                line += num(sx(s.x[i])) + "," + num(sy(s.mean[i])) + " ";
            line.pop_back();
            svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"/>\n";
        }
        svg += "</g>\n";
    }

    double lx = kMarginLeft;
    const double ly = cell_h + 8;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const char* color = kPalette[i % std::size(kPalette)];
        svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" width=\"14\" height=\"10\" fill=\"" +
               color + "\"/>\n";
        svg += "<text x=\"" + num(lx + 20) + "\" y=\"" + num(ly + 9) + "\">" + escape(labels[i]) +
               "</text>\n";
        lx += 30.0 + 7.0 * static_cast<double>(labels[i].size());
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace ropo
