#include "invabc/forming.hpp"

#include "invabc/csv.hpp"
#include "invabc/errors.hpp"

#include <cmath>
#include <sstream>

namespace invabc::sim {

namespace {

double ipow(double x, int p) {
    double r = 1.0;
    for (int k = 0; k < p; ++k) r *= x;
    return r;
}

void check_even_power(int p) {
    if (p < 2 || p % 2 != 0) throw ConfigError("aggregation power must be a positive even integer");
}

void check_field(const StrainField& f) {
    const std::size_t n = f.grid * f.grid;
    if (f.grid == 0 || f.eps1.size() != n || f.eps2.size() != n || f.thickness.size() != n)
        throw ShapeError("strain field arrays disagree with the grid size");
}

struct Band {
    double ths;
    double thw;
};

Band band_at(const Flc& flc, double e2) {
    if (flc.margin < 0.0 || flc.stretch_margin < 0.0)
        throw ConfigError("flc margins must be nonnegative");
    const double phis = flc.phi_s(e2);
    const double phiw = flc.phi_w(e2);
    if (!(phis > phiw)) {
        std::ostringstream msg;
        msg << "flc curves cross at e2 = " << e2;
        throw ConfigError(msg.str());
    }
    const Band b{phis - flc.margin, phiw + flc.margin};
    if (!(b.ths >= b.thw))
        throw ConfigError("safety margin collapses the safe band");
    return b;
}

void put(std::ostringstream& out, const char* key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << "=" << buf << "\n";
}

} // namespace

ZoneColors SimConfig::default_zone_colors() {
    return {{{255, 0, 0}, {255, 165, 0}, {0, 255, 0}, {160, 160, 160}, {0, 200, 255}, {0, 0, 255}}};
}

std::string canonical_text(const SimConfig& cfg) {
    std::ostringstream out;
    out << "grid=" << cfg.grid << "\n";
    put(out, "h0", cfg.h0);
    out << "dim=" << cfg.dim() << "\n";
    for (std::size_t d = 0; d < cfg.lo.size(); ++d) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "bounds%zu=%.17g,%.17g", d, cfg.lo[d], cfg.hi[d]);
        out << buf << "\n";
    }
    put(out, "e2_amp", cfg.e2_amp);
    put(out, "e2_base", cfg.e2_base);
    put(out, "e2_gain", cfg.e2_gain);
    put(out, "e1_base", cfg.e1_base);
    put(out, "e1_lin", cfg.e1_lin);
    put(out, "e1_bump", cfg.e1_bump);
    put(out, "center_base", cfg.center_base);
    put(out, "center_gain", cfg.center_gain);
    put(out, "width_base", cfg.width_base);
    put(out, "width_gain", cfg.width_gain);
    put(out, "extra_amp", cfg.extra_amp);
    put(out, "crack_base", cfg.flc.crack_base);
    put(out, "crack_slope", cfg.flc.crack_slope);
    put(out, "wrinkle_slope", cfg.flc.wrinkle_slope);
    put(out, "margin", cfg.flc.margin);
    put(out, "stretch_margin", cfg.flc.stretch_margin);
    for (std::size_t z = 0; z < cfg.colors.size(); ++z) {
        out << "color" << z << "=" << int(cfg.colors[z][0]) << "," << int(cfg.colors[z][1]) << ","
            << int(cfg.colors[z][2]) << "\n";
    }
    put(out, "mask_cx", cfg.mask.cx);
    put(out, "mask_cy", cfg.mask.cy);
    put(out, "mask_radius", cfg.mask.radius);
    return out.str();
}

StrainField simulate(const std::vector<double>& theta, const SimConfig& cfg) {
    if (cfg.lo.size() != cfg.hi.size())
        throw ConfigError("simulate: bounds vectors differ in length");
    if (cfg.dim() < 6) throw ConfigError("simulate: the field model needs at least 6 parameters");
    if (cfg.grid == 0) throw ConfigError("simulate: grid must be positive");
    if (!(cfg.h0 > 0.0)) throw ConfigError("simulate: initial thickness must be positive");
    if (theta.size() != cfg.dim()) {
        std::ostringstream msg;
        msg << "simulate: theta has " << theta.size() << " dims, config expects " << cfg.dim();
        throw ShapeError(msg.str());
    }

    std::vector<double> t(theta.size());
    for (std::size_t d = 0; d < theta.size(); ++d) {
        if (!(cfg.lo[d] < cfg.hi[d])) throw ConfigError("simulate: bounds must satisfy lo < hi");
        if (!(theta[d] >= cfg.lo[d] && theta[d] <= cfg.hi[d])) {
            std::ostringstream msg;
            msg << "simulate: theta[" << d << "] = " << theta[d] << " outside [" << cfg.lo[d]
                << ", " << cfg.hi[d] << "]";
            throw ConfigError(msg.str());
        }
        t[d] = (theta[d] - cfg.lo[d]) / (cfg.hi[d] - cfg.lo[d]);
    }

    const std::size_t g = cfg.grid;
    StrainField f;
    f.grid = g;
    f.h0 = cfg.h0;
    f.eps1.resize(g * g);
    f.eps2.resize(g * g);
    f.thickness.resize(g * g);

    const double bump_cx = cfg.center_base + cfg.center_gain * t[3];
    const double bump_cy = cfg.center_base + cfg.center_gain * t[4];
    const double bump_width = cfg.width_base + cfg.width_gain * t[5];
    const double e2_scale = cfg.e2_amp * (cfg.e2_base + cfg.e2_gain * t[0]);

    for (std::size_t i = 0; i < g; ++i) {
        const double y = (static_cast<double>(i) + 0.5) / static_cast<double>(g);
        for (std::size_t j = 0; j < g; ++j) {
            const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(g);
            const double e2 = e2_scale * (2.0 * x - 1.0);
            const double dx = x - bump_cx;
            const double dy = y - bump_cy;
            double e1 = cfg.e1_base + cfg.e1_lin * t[1] +
                        cfg.e1_bump * t[2] * std::exp(-(dx * dx + dy * dy) / bump_width);
            for (std::size_t d = 6; d < t.size(); ++d) {
                const double ramp = (d - 6) % 2 == 0 ? 2.0 * x - 1.0 : 2.0 * y - 1.0;
                e1 += cfg.extra_amp * (t[d] - 0.5) * ramp;
            }
            const std::size_t e = i * g + j;
            f.eps1[e] = e1;
            f.eps2[e] = e2;
            f.thickness[e] = cfg.h0 * std::exp(-(e1 + e2));
        }
    }
    return f;
}

ZoneLabelGrid classify_elements(const StrainField& field, const Flc& flc) {
    check_field(field);
    ZoneLabelGrid out;
    out.grid = field.grid;
    out.labels.resize(field.grid * field.grid);
    for (std::size_t e = 0; e < out.labels.size(); ++e) {
        const double e1 = field.eps1[e];
        const double e2 = field.eps2[e];
        const double phis = flc.phi_s(e2);
        const double phiw = flc.phi_w(e2);
        const Band b = band_at(flc, e2);
        Zone z;
        if (e1 > phis)
            z = Zone::Crack;
        else if (e1 > b.ths)
            z = Zone::RiskOfCrack;
        else if (e1 >= b.thw)
            z = e1 >= b.thw + flc.stretch_margin ? Zone::Safe : Zone::InsufficientStretch;
        else if (e1 >= phiw)
            z = Zone::WrinkleTendency;
        else
            z = Zone::Wrinkles;
        out.labels[e] = z;
    }
    return out;
}

img::RgbImage render_fld_image(const ZoneLabelGrid& labels, const ZoneColors& colors,
                               std::size_t height, std::size_t width, const DiskMask& mask) {
    if (labels.grid == 0 || labels.labels.size() != labels.grid * labels.grid)
        throw ShapeError("label grid arrays disagree with the grid size");
    if (height == 0 || width == 0) throw ConfigError("render: image size must be positive");

    img::RgbImage im;
    im.height = height;
    im.width = width;
    im.pixels.resize(height * width * 3);
    const std::size_t g = labels.grid;
    for (std::size_t py = 0; py < height; ++py) {
        const double ny = (static_cast<double>(py) + 0.5) / static_cast<double>(height);
        const std::size_t i = std::min(py * g / height, g - 1);
        for (std::size_t px = 0; px < width; ++px) {
            const double nx = (static_cast<double>(px) + 0.5) / static_cast<double>(width);
            std::uint8_t* p = im.px(py, px);
            if (!mask.contains(nx, ny)) {
                p[0] = p[1] = p[2] = 255;
                continue;
            }
            const std::size_t j = std::min(px * g / width, g - 1);
            const auto& c = colors[static_cast<std::size_t>(labels.labels[i * g + j])];
            p[0] = c[0];
            p[1] = c[1];
            p[2] = c[2];
        }
    }
    return im;
}

double thinning_objective(const StrainField& field, int p) {
    check_even_power(p);
    check_field(field);
    if (!(field.h0 > 0.0)) throw NumericError("thinning objective: initial thickness must be positive");
    double acc = 0.0;
    for (double h : field.thickness) acc += ipow((h - field.h0) / field.h0, p);
    return std::pow(acc, 1.0 / static_cast<double>(p));
}

double fld_objective(const StrainField& field, const Flc& flc, int p) {
    check_even_power(p);
    check_field(field);
    double acc = 0.0;
    for (std::size_t e = 0; e < field.eps1.size(); ++e) {
        const Band b = band_at(flc, field.eps2[e]);
        const double e1 = field.eps1[e];
        if (e1 > b.ths)
            acc += ipow(e1 - b.ths, p);
        else if (e1 < b.thw)
            acc += ipow(b.thw - e1, p);
    }
    return std::pow(acc, 1.0 / static_cast<double>(p));
}

DefectCounts count_defects(const ZoneLabelGrid& labels) {
    DefectCounts c;
    for (Zone z : labels.labels) {
        if (z == Zone::Crack) ++c.crack;
        if (z == Zone::Wrinkles) ++c.wrinkles;
    }
    return c;
}

void write_field_csv(const StrainField& field, const std::string& path) {
    check_field(field);
    const std::size_t g = field.grid;
    std::vector<std::vector<double>> rows;
    rows.reserve(g * g);
    for (std::size_t i = 0; i < g; ++i) {
        const double y = (static_cast<double>(i) + 0.5) / static_cast<double>(g);
        for (std::size_t j = 0; j < g; ++j) {
            const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(g);
            const std::size_t e = i * g + j;
            rows.push_back({x, y, field.eps1[e], field.eps2[e], field.thickness[e]});
        }
    }
    csv::write(path, {"x", "y", "eps1", "eps2", "thickness"}, rows);
}

} // namespace invabc::sim
