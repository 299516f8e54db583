#pragma once

#include "invabc/image.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace invabc::sim {

/// G x G element grid, row-major, element centers at ((j+0.5)/G, (i+0.5)/G).
struct StrainField {
    std::size_t grid = 0;
    double h0 = 0.8;
    std::vector<double> eps1;
    std::vector<double> eps2;
    std::vector<double> thickness;
};

/// Crack limit phi_s(e2) = crack_base + crack_slope * |e2|, wrinkle limit
/// phi_w(e2) = wrinkle_slope * e2. The safe band is inset by margin on both
/// sides; stretch_margin raises the under-stretch floor above the band bottom.
struct Flc {
    double crack_base = 0.30;
    double crack_slope = 0.8;
    double wrinkle_slope = -1.0;
    double margin = 0.05;
    double stretch_margin = 0.02;

    double phi_s(double e2) const { return crack_base + crack_slope * (e2 < 0 ? -e2 : e2); }
    double phi_w(double e2) const { return wrinkle_slope * e2; }
};

enum class Zone : int {
    Crack = 0,
    RiskOfCrack = 1,
    Safe = 2,
    InsufficientStretch = 3,
    WrinkleTendency = 4,
    Wrinkles = 5,
};

struct ZoneLabelGrid {
    std::size_t grid = 0;
    std::vector<Zone> labels;
};

using ZoneColors = std::array<std::array<std::uint8_t, 3>, 6>;

struct DiskMask {
    double cx = 0.5;
    double cy = 0.5;
    double radius = 0.45;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        return dx * dx + dy * dy <= radius * radius;
    }
};

struct SimConfig {
    std::size_t grid = 32;
    double h0 = 0.8;
    std::vector<double> lo = std::vector<double>(6, 0.0);
    std::vector<double> hi = std::vector<double>(6, 1.0);

    double e2_amp = 0.12;
    double e2_base = 0.5;
    double e2_gain = 0.8;

    double e1_base = 0.05;
    double e1_lin = 0.25;
    double e1_bump = 0.45;
    double center_base = 0.3;
    double center_gain = 0.4;
    double width_base = 0.02;
    double width_gain = 0.08;
    double extra_amp = 0.01;

    Flc flc;
    ZoneColors colors = default_zone_colors();
    DiskMask mask;

    std::size_t dim() const { return lo.size(); }
    static ZoneColors default_zone_colors();
};

/// Stable key=value rendering of every model coefficient, for hashing into
/// run manifests.
std::string canonical_text(const SimConfig& cfg);

/// Smooth synthetic strain field; theta is validated against the configured
/// bounds and normalized per dimension. Dimensions beyond the first six add
/// small linear ramps to eps1.
StrainField simulate(const std::vector<double>& theta, const SimConfig& cfg);

ZoneLabelGrid classify_elements(const StrainField& field, const Flc& flc);

/// Nearest-neighbor upscale of the labels; pixels outside the mask are white.
img::RgbImage render_fld_image(const ZoneLabelGrid& labels, const ZoneColors& colors,
                               std::size_t height, std::size_t width, const DiskMask& mask);

/// (sum_e ((h_e - h0)/h0)^p)^(1/p), p even and positive.
double thinning_objective(const StrainField& field, int p);

/// (sum_e excess^p)^(1/p) where excess is the distance to the inset band.
double fld_objective(const StrainField& field, const Flc& flc, int p);

struct DefectCounts {
    std::size_t crack = 0;
    std::size_t wrinkles = 0;
};

DefectCounts count_defects(const ZoneLabelGrid& labels);

/// CSV with one row per element: x, y, eps1, eps2, thickness.
void write_field_csv(const StrainField& field, const std::string& path);

} // namespace invabc::sim
