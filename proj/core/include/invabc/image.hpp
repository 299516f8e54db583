#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace invabc::img {

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    static RgbImage filled(std::size_t h, std::size_t w, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b);

    std::uint8_t* px(std::size_t y, std::size_t x) { return pixels.data() + 3 * (y * width + x); }
    const std::uint8_t* px(std::size_t y, std::size_t x) const {
        return pixels.data() + 3 * (y * width + x);
    }
    bool same_shape(const RgbImage& o) const { return height == o.height && width == o.width; }
};

/// Hexcone model: h in degrees [0, 360), s and v in [0, 1].
struct Hsv {
    double h = 0.0;
    double s = 0.0;
    double v = 0.0;
};

/// Closed intervals per channel; a hue interval with low.h > high.h wraps
/// through 0.
struct HsvBounds {
    Hsv low;
    Hsv high;
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
void hsv_to_rgb(double h, double s, double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

bool hsv_in_bounds(const Hsv& c, const HsvBounds& bounds);

HsvBounds default_green_bounds();

/// Componentwise min/max of h, s, v over the pixels inside the seed family.
HsvBounds extract_bounds(const RgbImage& image, const HsvBounds& family);

/// Black where every HSV channel exceeds color_low, white elsewhere. The
/// number of black (working region) pixels is reported through working_count
/// when given; zero means the mask is blank and the caller should warn.
RgbImage build_mask(const RgbImage& punch, const Hsv& color_low,
                    std::size_t* working_count = nullptr);

/// Per-channel saturating addition, so a white mask region clips to white and
/// a black one passes the input through.
RgbImage apply_mask(const RgbImage& fld, const RgbImage& mask);

/// Starts from flds[0] and fills each non-green pixel with the first green
/// value found at that position in the remaining images. Pixels that stay
/// non-green are counted through remaining_count when given.
RgbImage reconstruct_objective(const std::vector<RgbImage>& flds, const HsvBounds& green,
                               std::size_t* remaining_count = nullptr);

struct SsimParams {
    double c1 = 1e-4;
    double c2 = 9e-4;
    double c3 = 4.5e-4;
    double alpha = 1.0;
    double beta = 1.0;
    double gamma_exp = 1.0;
};

/// Global single-window SSIM on the luminance plane scaled to [0, 1].
double ssim(const RgbImage& x, const RgbImage& y, const SsimParams& params = {});

/// 8-bit PNG; grayscale loads replicate the channel, alpha is dropped.
RgbImage load_png(const std::string& path);
void save_png(const RgbImage& image, const std::string& path);

} // namespace invabc::img
