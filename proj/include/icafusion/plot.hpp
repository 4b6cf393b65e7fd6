#ifndef ICAFUSION_PLOT_HPP
#define ICAFUSION_PLOT_HPP

#include <string>
#include <vector>

#include "icafusion/data.hpp"

namespace icafusion {

/// Renders per-image metric values as a line plot (grid, polyline, dashed
/// mean line, numeric labels) into an 8-bit raster.
Raster8 render_line_plot(const std::string& title, const std::vector<double>& values,
                         double mean_value);

}  // namespace icafusion

#endif
