#pragma once

// Straight per-pixel transcription of the image preprocessing procedure,
// kept independent of the library so tests can demand pixel-exact agreement.

#include "invabc/image.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace refimg {

struct Hsv3 {
    double h, s, v;
};

inline Hsv3 to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    double mx = r, mn = r;
    mx = std::max(mx, std::max(g, b));
    mn = std::min(mn, std::min(g, b));
    const double d = mx - mn;
    Hsv3 c{0.0, 0.0, mx};
    if (mx > 0.0) c.s = d / mx;
    if (d > 0.0) {
        if (mx == r)
            c.h = 60.0 * ((g - b) / d);
        else if (mx == g)
            c.h = 60.0 * ((b - r) / d + 2.0);
        else
            c.h = 60.0 * ((r - g) / d + 4.0);
        if (c.h < 0.0) c.h += 360.0;
    }
    return c;
}

inline bool is_green(const Hsv3& c, const invabc::img::HsvBounds& g) {
    return c.h >= g.low.h && c.h <= g.high.h && c.s >= g.low.s && c.s <= g.high.s &&
           c.v >= g.low.v && c.v <= g.high.v;
}

inline invabc::img::RgbImage mask_of(const invabc::img::RgbImage& punch,
                                     const invabc::img::Hsv& low) {
    invabc::img::RgbImage mask = punch;
    for (std::size_t i = 0; i < punch.height * punch.width; ++i) {
        const std::uint8_t* p = punch.pixels.data() + 3 * i;
        const Hsv3 c = to_hsv(p[0], p[1], p[2]);
        const std::uint8_t value = (c.h > low.h && c.s > low.s && c.v > low.v) ? 0 : 255;
        mask.pixels[3 * i] = value;
        mask.pixels[3 * i + 1] = value;
        mask.pixels[3 * i + 2] = value;
    }
    return mask;
}

inline invabc::img::RgbImage process_fld(const invabc::img::RgbImage& fld,
                                         const invabc::img::RgbImage& mask) {
    invabc::img::RgbImage out = fld;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const int sum = int(fld.pixels[i]) + int(mask.pixels[i]);
        out.pixels[i] = static_cast<std::uint8_t>(sum > 255 ? 255 : sum);
    }
    return out;
}

// image-major traversal: each later image fills whatever is still non-green
inline invabc::img::RgbImage objective_of(const std::vector<invabc::img::RgbImage>& flds,
                                          const invabc::img::HsvBounds& green) {
    invabc::img::RgbImage obj = flds.front();
    for (std::size_t k = 1; k < flds.size(); ++k) {
        for (std::size_t i = 0; i < obj.height * obj.width; ++i) {
            std::uint8_t* a = obj.pixels.data() + 3 * i;
            if (is_green(to_hsv(a[0], a[1], a[2]), green)) continue;
            const std::uint8_t* b = flds[k].pixels.data() + 3 * i;
            if (is_green(to_hsv(b[0], b[1], b[2]), green)) {
                a[0] = b[0];
                a[1] = b[1];
                a[2] = b[2];
            }
        }
    }
    return obj;
}

} // namespace refimg
