#include "invabc/image.hpp"

#include "invabc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace invabc::img {

namespace {

void check_image(const char* who, const RgbImage& im) {
    if (im.height == 0 || im.width == 0)
        throw ShapeError(std::string(who) + ": empty image");
    if (im.pixels.size() != im.height * im.width * 3) {
        std::ostringstream msg;
        msg << who << ": pixel buffer holds " << im.pixels.size() << " bytes, expected "
            << im.height * im.width * 3;
        throw ShapeError(msg.str());
    }
}

void check_same_shape(const char* who, const RgbImage& a, const RgbImage& b) {
    check_image(who, a);
    check_image(who, b);
    if (!a.same_shape(b)) {
        std::ostringstream msg;
        msg << who << ": shapes " << a.height << "x" << a.width << " and " << b.height << "x"
            << b.width << " differ";
        throw ShapeError(msg.str());
    }
}

} // namespace

RgbImage RgbImage::filled(std::size_t h, std::size_t w, std::uint8_t r, std::uint8_t g,
                          std::uint8_t b) {
    RgbImage im;
    im.height = h;
    im.width = w;
    im.pixels.resize(h * w * 3);
    for (std::size_t i = 0; i < h * w; ++i) {
        im.pixels[3 * i] = r;
        im.pixels[3 * i + 1] = g;
        im.pixels[3 * i + 2] = b;
    }
    return im;
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    const double delta = maxc - minc;

    Hsv out;
    out.v = maxc;
    out.s = maxc == 0.0 ? 0.0 : delta / maxc;
    if (delta == 0.0) {
        out.h = 0.0;
    } else if (maxc == r) {
        out.h = 60.0 * ((g - b) / delta);
    } else if (maxc == g) {
        out.h = 60.0 * ((b - r) / delta + 2.0);
    } else {
        out.h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (out.h < 0.0) out.h += 360.0;
    return out;
}

void hsv_to_rgb(double h, double s, double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    h = std::fmod(h, 360.0);
    if (h < 0.0) h += 360.0;
    s = std::clamp(s, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);

    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0.0, g1 = 0.0, b1 = 0.0;
    switch (static_cast<int>(hp)) {
        case 0: r1 = c; g1 = x; break;
        case 1: r1 = x; g1 = c; break;
        case 2: g1 = c; b1 = x; break;
        case 3: g1 = x; b1 = c; break;
        case 4: r1 = x; b1 = c; break;
        default: r1 = c; b1 = x; break;
    }
    const double m = v - c;
    r = static_cast<std::uint8_t>(std::lround((r1 + m) * 255.0));
    g = static_cast<std::uint8_t>(std::lround((g1 + m) * 255.0));
    b = static_cast<std::uint8_t>(std::lround((b1 + m) * 255.0));
}

bool hsv_in_bounds(const Hsv& c, const HsvBounds& bounds) {
    const bool hue_ok = bounds.low.h <= bounds.high.h
                            ? (c.h >= bounds.low.h && c.h <= bounds.high.h)
                            : (c.h >= bounds.low.h || c.h <= bounds.high.h);
    return hue_ok && c.s >= bounds.low.s && c.s <= bounds.high.s && c.v >= bounds.low.v &&
           c.v <= bounds.high.v;
}

HsvBounds default_green_bounds() { return {{90.0, 0.3, 0.3}, {150.0, 1.0, 1.0}}; }

HsvBounds extract_bounds(const RgbImage& image, const HsvBounds& family) {
    check_image("extract bounds", image);
    bool any = false;
    HsvBounds out{{360.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
    for (std::size_t i = 0; i < image.height * image.width; ++i) {
        const std::uint8_t* p = image.pixels.data() + 3 * i;
        const Hsv c = rgb_to_hsv(p[0], p[1], p[2]);
        if (!hsv_in_bounds(c, family)) continue;
        any = true;
        out.low.h = std::min(out.low.h, c.h);
        out.low.s = std::min(out.low.s, c.s);
        out.low.v = std::min(out.low.v, c.v);
        out.high.h = std::max(out.high.h, c.h);
        out.high.s = std::max(out.high.s, c.s);
        out.high.v = std::max(out.high.v, c.v);
    }
    if (!any) throw NumericError("extract bounds: no pixel falls inside the seed family");
    return out;
}

RgbImage build_mask(const RgbImage& punch, const Hsv& color_low, std::size_t* working_count) {
    check_image("build mask", punch);
    RgbImage mask;
    mask.height = punch.height;
    mask.width = punch.width;
    mask.pixels.resize(punch.pixels.size());
    std::size_t black = 0;
    for (std::size_t i = 0; i < punch.height * punch.width; ++i) {
        const std::uint8_t* p = punch.pixels.data() + 3 * i;
        const Hsv c = rgb_to_hsv(p[0], p[1], p[2]);
        const bool working = c.h > color_low.h && c.s > color_low.s && c.v > color_low.v;
        const std::uint8_t value = working ? 0 : 255;
        mask.pixels[3 * i] = value;
        mask.pixels[3 * i + 1] = value;
        mask.pixels[3 * i + 2] = value;
        if (working) ++black;
    }
    if (working_count) *working_count = black;
    return mask;
}

RgbImage apply_mask(const RgbImage& fld, const RgbImage& mask) {
    check_same_shape("apply mask", fld, mask);
    RgbImage out = fld;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const unsigned sum = static_cast<unsigned>(fld.pixels[i]) + mask.pixels[i];
        out.pixels[i] = static_cast<std::uint8_t>(std::min(sum, 255u));
    }
    return out;
}

RgbImage reconstruct_objective(const std::vector<RgbImage>& flds, const HsvBounds& green,
                               std::size_t* remaining_count) {
    if (flds.empty()) throw ConfigError("objective reconstruction needs at least one image");
    for (std::size_t i = 1; i < flds.size(); ++i)
        check_same_shape("objective reconstruction", flds[0], flds[i]);
    check_image("objective reconstruction", flds[0]);

    RgbImage out = flds[0];
    std::size_t remaining = 0;
    for (std::size_t i = 0; i < out.height * out.width; ++i) {
        std::uint8_t* p = out.pixels.data() + 3 * i;
        if (hsv_in_bounds(rgb_to_hsv(p[0], p[1], p[2]), green)) continue;
        bool replaced = false;
        for (std::size_t k = 1; k < flds.size() && !replaced; ++k) {
            const std::uint8_t* q = flds[k].pixels.data() + 3 * i;
            if (hsv_in_bounds(rgb_to_hsv(q[0], q[1], q[2]), green)) {
                p[0] = q[0];
                p[1] = q[1];
                p[2] = q[2];
                replaced = true;
            }
        }
        if (!replaced) ++remaining;
    }
    if (remaining_count) *remaining_count = remaining;
    return out;
}

double ssim(const RgbImage& x, const RgbImage& y, const SsimParams& params) {
    check_same_shape("ssim", x, y);
    if (!(params.c1 > 0.0) || !(params.c2 > 0.0) || !(params.c3 > 0.0))
        throw ConfigError("ssim stabilizers must be positive");
    if (!(params.alpha > 0.0) || !(params.beta > 0.0) || !(params.gamma_exp > 0.0))
        throw ConfigError("ssim exponents must be positive");

    const std::size_t n = x.height * x.width;
    double ux = 0.0, uy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* a = x.pixels.data() + 3 * i;
        const std::uint8_t* b = y.pixels.data() + 3 * i;
        ux += (0.299 * a[0] + 0.587 * a[1] + 0.114 * a[2]) / 255.0;
        uy += (0.299 * b[0] + 0.587 * b[1] + 0.114 * b[2]) / 255.0;
    }
    ux /= static_cast<double>(n);
    uy /= static_cast<double>(n);

    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* a = x.pixels.data() + 3 * i;
        const std::uint8_t* b = y.pixels.data() + 3 * i;
        const double dx = (0.299 * a[0] + 0.587 * a[1] + 0.114 * a[2]) / 255.0 - ux;
        const double dy = (0.299 * b[0] + 0.587 * b[1] + 0.114 * b[2]) / 255.0 - uy;
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    vx /= static_cast<double>(n);
    vy /= static_cast<double>(n);
    cov /= static_cast<double>(n);

    const bool plain = params.alpha == 1.0 && params.beta == 1.0 && params.gamma_exp == 1.0 &&
                       params.c3 == 0.5 * params.c2;
    if (plain) {
        // ux^2 + uy^2 written as (ux-uy)^2 + 2 ux uy so that x == y yields
        // exactly 1 under any fp contraction the compiler picks
        const double du = ux - uy;
        const double lnum = 2.0 * (ux * uy) + params.c1;
        const double lden = du * du + lnum;
        const double cnum = 2.0 * cov + params.c2;
        const double cden = vx + vy + params.c2;
        return (lnum * cnum) / (lden * cden);
    }
    const double sx = std::sqrt(vx), sy = std::sqrt(vy);
    const double l = (2.0 * ux * uy + params.c1) / (ux * ux + uy * uy + params.c1);
    const double c = (2.0 * sx * sy + params.c2) / (vx + vy + params.c2);
    const double s = (cov + params.c3) / (sx * sy + params.c3);
    return std::pow(l, params.alpha) * std::pow(c, params.beta) *
           (s >= 0.0 ? std::pow(s, params.gamma_exp) : -std::pow(-s, params.gamma_exp));
}

} // namespace invabc::img
