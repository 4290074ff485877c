#pragma once

// Static SVG line plots with a shaded one-standard-deviation band. Output is a
// pure function of the input (fixed number formatting, no timestamps).

#include <string>
#include <vector>

namespace ropo {

struct AggregateRow;

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> std; ///< band half-width; empty for no band
};

struct PlotPanel {
    std::string title;
    std::vector<PlotSeries> series;
};

struct PlotOptions {
    std::string x_label = "episode";
    std::string y_label = "evaluation return";
    double panel_width = 360.0;
    double panel_height = 260.0;
};

enum class PlotQuantity { eval_return, cumulative_regret, robust_value, v_hat };

const char* to_string(PlotQuantity quantity);
PlotQuantity plot_quantity_from_string(const std::string& name);

PlotSeries series_from_aggregate(const std::string& label, const std::vector<AggregateRow>& rows,
                                 PlotQuantity quantity);

/// Panels are laid out side by side. Throws ConfigError when there is nothing to draw.
std::string render_svg(const std::vector<PlotPanel>& panels, const PlotOptions& options = {});

} // namespace ropo
