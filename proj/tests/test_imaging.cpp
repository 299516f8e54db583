#include "doctest.h"

#include "invabc/errors.hpp"
#include "invabc/image.hpp"
#include "invabc/rng.hpp"
#include "support/pixel_reference.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace invabc;
using namespace invabc::img;

namespace {

RgbImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    RgbImage im;
    im.height = h;
    im.width = w;
    im.pixels.resize(h * w * 3);
    Rng rng(seed);
    for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    return im;
}

// palette with plenty of green so replacement paths actually fire
RgbImage random_fld_like(std::size_t h, std::size_t w, std::uint64_t seed) {
    static const std::uint8_t palette[6][3] = {{0, 255, 0},   {60, 200, 60}, {255, 0, 0},
                                               {255, 165, 0}, {0, 0, 255},  {160, 160, 160}};
    RgbImage im;
    im.height = h;
    im.width = w;
    im.pixels.resize(h * w * 3);
    Rng rng(seed);
    for (std::size_t i = 0; i < h * w; ++i) {
        const std::uint8_t* c = palette[rng.index(6)];
        im.pixels[3 * i] = c[0];
        im.pixels[3 * i + 1] = c[1];
        im.pixels[3 * i + 2] = c[2];
    }
    return im;
}

std::size_t green_count(const RgbImage& im, const HsvBounds& g) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < im.height * im.width; ++i) {
        const std::uint8_t* p = im.px(0, i);
        if (hsv_in_bounds(rgb_to_hsv(p[0], p[1], p[2]), g)) ++n;
    }
    return n;
}

double lum(const std::uint8_t* p) { return (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0; }

// component-product evaluation, the long way around
double ssim_reference(const RgbImage& x, const RgbImage& y) {
    const double c1 = 1e-4, c2 = 9e-4, c3 = c2 / 2.0;
    const std::size_t n = x.height * x.width;
    double ux = 0, uy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ux += lum(x.pixels.data() + 3 * i);
        uy += lum(y.pixels.data() + 3 * i);
    }
    ux /= double(n);
    uy /= double(n);
    double vx = 0, vy = 0, cov = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = lum(x.pixels.data() + 3 * i) - ux;
        const double b = lum(y.pixels.data() + 3 * i) - uy;
        vx += a * a;
        vy += b * b;
        cov += a * b;
    }
    vx /= double(n);
    vy /= double(n);
    cov /= double(n);
    const double l = (2 * ux * uy + c1) / (ux * ux + uy * uy + c1);
    const double c = (2 * std::sqrt(vx) * std::sqrt(vy) + c2) / (vx + vy + c2);
    const double s = (cov + c3) / (std::sqrt(vx) * std::sqrt(vy) + c3);
    return l * c * s;
}

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "invabc_imaging_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type,
               const std::vector<std::uint8_t>& data) {
    put32(out, std::uint32_t(data.size()));
    const std::size_t at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + at, uInt(4 + data.size()));
    put32(out, std::uint32_t(crc));
}

// hand-assembled PNG with a chosen color type and per-row filters applied in
// the forward direction, so the loader has to undo them
std::vector<std::uint8_t> make_png(std::uint32_t w, std::uint32_t h, int color_type,
                                   const std::vector<std::uint8_t>& plane,
                                   const std::vector<std::uint8_t>& filters) {
    const std::size_t bpp = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
    const std::size_t stride = w * bpp;
    std::vector<std::uint8_t> raw((stride + 1) * h);
    for (std::uint32_t y = 0; y < h; ++y) {
        const std::uint8_t f = filters[y];
        raw[y * (stride + 1)] = f;
        for (std::size_t i = 0; i < stride; ++i) {
            const int x = plane[y * stride + i];
            const int a = i >= bpp ? plane[y * stride + i - bpp] : 0;
            const int b = y > 0 ? plane[(y - 1) * stride + i] : 0;
            const int c = (y > 0 && i >= bpp) ? plane[(y - 1) * stride + i - bpp] : 0;
            int v = x;
            if (f == 1) v = x - a;
            if (f == 2) v = x - b;
            if (f == 3) v = x - (a + b) / 2;
            if (f == 4) {
                const int p = a + b - c;
                const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                const int pred = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                v = x - pred;
            }
            raw[y * (stride + 1) + 1 + i] = std::uint8_t(v & 0xff);
        }
    }
    uLongf clen = compressBound(uLong(raw.size()));
    std::vector<std::uint8_t> z(clen);
    REQUIRE(compress2(z.data(), &clen, raw.data(), uLong(raw.size()), 6) == Z_OK);
    z.resize(clen);

    std::vector<std::uint8_t> ihdr;
    put32(ihdr, w);
    put32(ihdr, h);
    ihdr.push_back(8);
    ihdr.push_back(std::uint8_t(color_type));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);

    std::vector<std::uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", z);
    put_chunk(out, "IEND", {});
    return out;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("rgb to hsv handles the primary colors and the gray axis") {
    Hsv red = rgb_to_hsv(255, 0, 0);
    CHECK(red.h == 0.0);
    CHECK(red.s == 1.0);
    CHECK(red.v == 1.0);

    Hsv green = rgb_to_hsv(0, 255, 0);
    CHECK(green.h == 120.0);
    CHECK(green.s == 1.0);
    CHECK(green.v == 1.0);

    Hsv blue = rgb_to_hsv(0, 0, 255);
    CHECK(blue.h == 240.0);

    Hsv gray = rgb_to_hsv(128, 128, 128);
    CHECK(gray.s == 0.0);
    CHECK(gray.v == doctest::Approx(128.0 / 255.0).epsilon(1e-12));

    Hsv orange = rgb_to_hsv(255, 128, 0);
    CHECK(orange.h == doctest::Approx(60.0 * 128.0 / 255.0).epsilon(1e-12));
}

TEST_CASE("hsv to rgb hits the hexcone corners") {
    std::uint8_t r, g, b;
    hsv_to_rgb(0.0, 1.0, 1.0, r, g, b);
    CHECK(int(r) == 255);
    CHECK(int(g) == 0);
    CHECK(int(b) == 0);
    hsv_to_rgb(120.0, 1.0, 1.0, r, g, b);
    CHECK(int(g) == 255);
    hsv_to_rgb(240.0, 1.0, 1.0, r, g, b);
    CHECK(int(b) == 255);
    hsv_to_rgb(0.0, 0.0, 0.5, r, g, b);
    CHECK(int(r) == 128);
    CHECK(int(g) == 128);
    CHECK(int(b) == 128);
}

TEST_CASE("rgb hsv round trip is within one quantization step") {
    Rng rng(5);
    for (int i = 0; i < 3000; ++i) {
        const auto r = std::uint8_t(rng.index(256));
        const auto g = std::uint8_t(rng.index(256));
        const auto b = std::uint8_t(rng.index(256));
        const Hsv c = rgb_to_hsv(r, g, b);
        std::uint8_t r2, g2, b2;
        hsv_to_rgb(c.h, c.s, c.v, r2, g2, b2);
        CHECK(std::abs(int(r) - int(r2)) <= 1);
        CHECK(std::abs(int(g) - int(g2)) <= 1);
        CHECK(std::abs(int(b) - int(b2)) <= 1);
    }
}

TEST_CASE("hsv bounds support wrapped hue intervals") {
    HsvBounds wrap{{350.0, 0.0, 0.0}, {10.0, 1.0, 1.0}};
    CHECK(hsv_in_bounds({355.0, 0.5, 0.5}, wrap));
    CHECK(hsv_in_bounds({5.0, 0.5, 0.5}, wrap));
    CHECK_FALSE(hsv_in_bounds({180.0, 0.5, 0.5}, wrap));

    HsvBounds green = default_green_bounds();
    CHECK(hsv_in_bounds(rgb_to_hsv(0, 255, 0), green));
    CHECK_FALSE(hsv_in_bounds(rgb_to_hsv(255, 0, 0), green));
    CHECK_FALSE(hsv_in_bounds(rgb_to_hsv(40, 60, 40), green)); // too dark
}

TEST_CASE("bounds extraction reports the hsv envelope of the family") {
    RgbImage im = RgbImage::filled(2, 2, 255, 0, 0);
    std::uint8_t* p = im.px(0, 1);
    p[0] = 0; p[1] = 255; p[2] = 0;
    p = im.px(1, 0);
    p[0] = 60; p[1] = 200; p[2] = 60;

    HsvBounds env = extract_bounds(im, default_green_bounds());
    const Hsv a = rgb_to_hsv(0, 255, 0);
    const Hsv b = rgb_to_hsv(60, 200, 60);
    CHECK(env.low.h == std::min(a.h, b.h));
    CHECK(env.high.h == std::max(a.h, b.h));
    CHECK(env.low.v == std::min(a.v, b.v));
    CHECK_THROWS_AS((void)extract_bounds(RgbImage::filled(2, 2, 255, 0, 0), default_green_bounds()),
                    NumericError);
}

TEST_CASE("mask construction follows the threshold rule") {
    const Hsv low{90.0, 0.2, 0.2};

    std::size_t working = 0;
    RgbImage above = build_mask(RgbImage::filled(3, 4, 0, 128, 255), low, &working);
    CHECK(working == 12);
    for (auto v : above.pixels) CHECK(int(v) == 0);

    RgbImage below = build_mask(RgbImage::filled(3, 4, 255, 0, 0), low, &working);
    CHECK(working == 0);
    for (auto v : below.pixels) CHECK(int(v) == 255);
}

TEST_CASE("mask and fld processing agree with the per-pixel transcription") {
    const Hsv low{90.0, 0.2, 0.2};
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        RgbImage punch = random_image(9, 7, seed);
        RgbImage mask = build_mask(punch, low);
        CHECK(mask.pixels == refimg::mask_of(punch, low).pixels);

        RgbImage fld = random_image(9, 7, seed + 100);
        CHECK(apply_mask(fld, mask).pixels == refimg::process_fld(fld, mask).pixels);
    }
}

TEST_CASE("masking saturates and is idempotent") {
    RgbImage fld = random_image(6, 5, 9);
    RgbImage black = RgbImage::filled(6, 5, 0, 0, 0);
    RgbImage white = RgbImage::filled(6, 5, 255, 255, 255);

    CHECK(apply_mask(fld, black).pixels == fld.pixels);
    CHECK(apply_mask(fld, white).pixels == white.pixels);

    RgbImage mask = build_mask(random_image(6, 5, 10), {90.0, 0.2, 0.2});
    RgbImage once = apply_mask(fld, mask);
    CHECK(apply_mask(once, mask).pixels == once.pixels);

    CHECK_THROWS_AS((void)apply_mask(fld, RgbImage::filled(4, 5, 0, 0, 0)), ShapeError);
}

TEST_CASE("objective reconstruction replaces non-green pixels in list order") {
    const HsvBounds green = default_green_bounds();
    RgbImage a = RgbImage::filled(1, 3, 255, 0, 0);
    std::uint8_t* p = a.px(0, 0);
    p[0] = 0; p[1] = 255; p[2] = 0;
    RgbImage b = RgbImage::filled(1, 3, 0, 0, 255);
    p = b.px(0, 1);
    p[0] = 30; p[1] = 220; p[2] = 30;
    RgbImage c = RgbImage::filled(1, 3, 0, 255, 0);

    std::size_t remaining = 99;
    RgbImage obj = reconstruct_objective({a, b, c}, green, &remaining);
    CHECK(remaining == 0);
    CHECK(int(obj.px(0, 0)[1]) == 255); // kept from a
    CHECK(int(obj.px(0, 1)[0]) == 30);  // filled from b, not c
    CHECK(int(obj.px(0, 2)[1]) == 255); // filled from c

    RgbImage only = reconstruct_objective({a}, green, &remaining);
    CHECK(only.pixels == a.pixels);
    CHECK(remaining == 2);

    CHECK_THROWS_AS((void)reconstruct_objective({}, green), ConfigError);
}

TEST_CASE("objective reconstruction matches the transcription on random stacks") {
    const HsvBounds green = default_green_bounds();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::vector<RgbImage> flds;
        for (std::uint64_t k = 0; k < 4; ++k)
            flds.push_back(random_fld_like(8, 8, 17 * seed + k));
        RgbImage got = reconstruct_objective(flds, green);
        CHECK(got.pixels == refimg::objective_of(flds, green).pixels);
        CHECK(green_count(got, green) >= green_count(flds[0], green));
    }
}

TEST_CASE("ssim is one for identical images and symmetric") {
    RgbImage x = random_image(12, 10, 21);
    RgbImage y = random_image(12, 10, 22);
    CHECK(ssim(x, x) == 1.0);
    CHECK(ssim(y, y) == 1.0);
    CHECK(ssim(x, y) == ssim(y, x));
    CHECK_THROWS_AS((void)ssim(x, RgbImage::filled(3, 3, 0, 0, 0)), ShapeError);
}

TEST_CASE("ssim of constant images takes the luminance-only closed form") {
    RgbImage x = RgbImage::filled(4, 4, 100, 100, 100);
    RgbImage y = RgbImage::filled(4, 4, 200, 200, 200);
    const double a = 100.0 / 255.0, b = 200.0 / 255.0, c1 = 1e-4;
    CHECK(ssim(x, y) == doctest::Approx((2 * a * b + c1) / (a * a + b * b + c1)).epsilon(1e-12));
}

TEST_CASE("ssim agrees with the component-product evaluation") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        RgbImage x = random_image(8, 8, seed);
        RgbImage y = random_image(8, 8, seed + 50);
        CHECK(ssim(x, y) == doctest::Approx(ssim_reference(x, y)).epsilon(1e-9));
        const double v = ssim(x, y);
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("ssim shrugs off a shared luminance shift on high-variance images") {
    RgbImage x = random_image(16, 16, 61);
    RgbImage y = random_image(16, 16, 62);
    for (auto& p : x.pixels) p = std::uint8_t(20 + (int(p) * 200) / 255);
    for (auto& p : y.pixels) p = std::uint8_t(20 + (int(p) * 200) / 255);
    RgbImage xs = x, ys = y;
    for (auto& p : xs.pixels) p = std::uint8_t(int(p) + 10);
    for (auto& p : ys.pixels) p = std::uint8_t(int(p) + 10);
    CHECK(std::abs(ssim(xs, ys) - ssim(x, y)) < 1e-3);
}

TEST_CASE("ssim on inverted images goes negative") {
    RgbImage x = random_image(16, 16, 71);
    RgbImage y = x;
    for (auto& p : y.pixels) p = std::uint8_t(255 - int(p));
    const double v = ssim(x, y);
    CHECK(v < 0.0);
    CHECK(v >= -1.0);
}

TEST_CASE("png round trip reproduces pixels and bytes deterministically") {
    RgbImage im = random_image(9, 16, 81);
    const auto p1 = temp_file("roundtrip1.png");
    const auto p2 = temp_file("roundtrip2.png");
    save_png(im, p1.string());
    save_png(im, p2.string());
    CHECK(read_bytes(p1) == read_bytes(p2));
    RgbImage back = load_png(p1.string());
    CHECK(back.height == im.height);
    CHECK(back.width == im.width);
    CHECK(back.pixels == im.pixels);

    RgbImage tiny = RgbImage::filled(1, 1, 7, 8, 9);
    const auto p3 = temp_file("tiny.png");
    save_png(tiny, p3.string());
    CHECK(load_png(p3.string()).pixels == tiny.pixels);
}

TEST_CASE("png loader undoes every scanline filter") {
    Rng rng(91);
    const std::uint32_t w = 7, h = 5;
    std::vector<std::uint8_t> plane(w * h * 3);
    for (auto& v : plane) v = std::uint8_t(rng.index(256));
    const auto path = temp_file("filters.png");
    write_bytes(path, make_png(w, h, 2, plane, {0, 1, 2, 3, 4}));
    RgbImage im = load_png(path.string());
    CHECK(im.pixels == plane);
}

TEST_CASE("png loader promotes grayscale and drops alpha") {
    const std::uint32_t w = 3, h = 2;
    std::vector<std::uint8_t> gray = {10, 20, 30, 40, 50, 60};
    const auto gpath = temp_file("gray.png");
    write_bytes(gpath, make_png(w, h, 0, gray, {0, 0}));
    RgbImage gim = load_png(gpath.string());
    for (std::size_t i = 0; i < w * h; ++i) {
        CHECK(gim.pixels[3 * i] == gray[i]);
        CHECK(gim.pixels[3 * i + 1] == gray[i]);
        CHECK(gim.pixels[3 * i + 2] == gray[i]);
    }

    std::vector<std::uint8_t> rgba(w * h * 4);
    Rng rng(92);
    for (auto& v : rgba) v = std::uint8_t(rng.index(256));
    const auto apath = temp_file("rgba.png");
    write_bytes(apath, make_png(w, h, 6, rgba, {0, 4}));
    RgbImage aim = load_png(apath.string());
    for (std::size_t i = 0; i < w * h; ++i) {
        CHECK(aim.pixels[3 * i] == rgba[4 * i]);
        CHECK(aim.pixels[3 * i + 1] == rgba[4 * i + 1]);
        CHECK(aim.pixels[3 * i + 2] == rgba[4 * i + 2]);
    }
}

TEST_CASE("png loader reports the byte offset of malformed input") {
    RgbImage im = random_image(4, 4, 93);
    const auto good = temp_file("good.png");
    save_png(im, good.string());
    auto bytes = read_bytes(good);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 6);
    const auto tpath = temp_file("truncated.png");
    write_bytes(tpath, truncated);
    CHECK_THROWS_WITH_AS((void)load_png(tpath.string()), doctest::Contains("byte"), IoError);

    auto corrupt = bytes;
    corrupt[40] ^= 0xff;
    const auto cpath = temp_file("corrupt.png");
    write_bytes(cpath, corrupt);
    CHECK_THROWS_AS((void)load_png(cpath.string()), IoError);

    auto not_png = bytes;
    not_png[0] = 'X';
    const auto npath = temp_file("notpng.png");
    write_bytes(npath, not_png);
    CHECK_THROWS_WITH_AS((void)load_png(npath.string()), doctest::Contains("byte 0"), IoError);

    CHECK_THROWS_AS((void)load_png(temp_file("missing.png").string()), IoError);
}
