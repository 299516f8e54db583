#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace invabc::svg {

inline constexpr double kNoMarker = std::numeric_limits<double>::quiet_NaN();

/// Weighted histogram of values binned over [lo, hi]; a finite marker draws
/// a dashed vertical line (e.g. the posterior mean). Emits a self-contained
/// SVG with axes and tick labels; output bytes depend only on the arguments.
void write_histogram(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::vector<double>& values,
                     const std::vector<double>& weights, std::size_t bins, double lo, double hi,
                     double marker = kNoMarker);

/// Polyline through (xs, ys) with point markers.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<double>& xs, const std::vector<double>& ys);

/// Bars indexed 1..n; a finite reference draws a dashed horizontal line.
void write_bar_plot(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<double>& heights, double reference = kNoMarker);

} // namespace invabc::svg
