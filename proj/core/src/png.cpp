#include "invabc/errors.hpp"
#include "invabc/image.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace invabc::img {

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

[[noreturn]] void parse_fail(std::size_t offset, const std::string& why) {
    std::ostringstream msg;
    msg << "png parse failed at byte " << offset << ": " << why;
    throw IoError(msg.str());
}

std::uint32_t be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

} // namespace

void save_png(const RgbImage& image, const std::string& path) {
    if (image.height == 0 || image.width == 0 ||
        image.pixels.size() != image.height * image.width * 3)
        throw ShapeError("png save: image dimensions and pixel buffer disagree");

    const std::size_t stride = image.width * 3;
    std::vector<std::uint8_t> raw((stride + 1) * image.height);
    for (std::size_t y = 0; y < image.height; ++y) {
        raw[y * (stride + 1)] = 0;
        std::memcpy(raw.data() + y * (stride + 1) + 1, image.pixels.data() + y * stride, stride);
    }

    uLongf clen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(clen);
    if (compress2(compressed.data(), &clen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw IoError("png save: deflate failed");
    compressed.resize(clen);

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(image.width));
    put_be32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);
    ihdr.push_back(2);
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);

    std::vector<std::uint8_t> out(kSignature, kSignature + 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("png save: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("png save: short write to " + path);
}

RgbImage load_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("png load: cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());

    if (buf.size() < 8 || std::memcmp(buf.data(), kSignature, 8) != 0)
        parse_fail(0, "bad signature");

    std::size_t off = 8;
    bool have_header = false;
    std::uint32_t width = 0, height = 0;
    int color_type = 0;
    std::size_t idat_at = 0;
    std::vector<std::uint8_t> idat;

    while (true) {
        if (off + 8 > buf.size()) parse_fail(off, "truncated chunk header");
        const std::uint32_t len = be32(buf.data() + off);
        if (off + 12 + static_cast<std::size_t>(len) > buf.size())
            parse_fail(off, "chunk overruns file");
        const char* type = reinterpret_cast<const char*>(buf.data() + off + 4);
        const std::uint8_t* data = buf.data() + off + 8;

        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, buf.data() + off + 4, 4 + len);
        if (static_cast<std::uint32_t>(crc) != be32(data + len))
            parse_fail(off + 8 + len, "crc mismatch");

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) parse_fail(off, "IHDR length");
            width = be32(data);
            height = be32(data + 4);
            const int bit_depth = data[8];
            color_type = data[9];
            if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20))
                parse_fail(off + 8, "unreasonable dimensions");
            if (bit_depth != 8) parse_fail(off + 16, "only 8-bit depth supported");
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
                parse_fail(off + 17, "unsupported color type");
            if (data[10] != 0 || data[11] != 0) parse_fail(off + 18, "bad compression/filter");
            if (data[12] != 0) parse_fail(off + 20, "interlacing not supported");
            have_header = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!have_header) parse_fail(off, "IDAT before IHDR");
            if (idat.empty()) idat_at = off;
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        off += 12 + len;
    }
    if (!have_header) parse_fail(off, "missing IHDR");
    if (idat.empty()) parse_fail(off, "missing IDAT");

    const std::size_t channels =
        color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    const std::size_t expected = (stride + 1) * height;
    std::vector<std::uint8_t> raw(expected);
    uLongf rlen = static_cast<uLongf>(expected);
    const int zret = uncompress(raw.data(), &rlen, idat.data(), static_cast<uLong>(idat.size()));
    if (zret != Z_OK || rlen != expected) parse_fail(idat_at, "inflate failed");

    std::vector<std::uint8_t> plane(stride * height);
    const std::size_t bpp = channels;
    for (std::size_t y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
        std::uint8_t* dst = plane.data() + y * stride;
        const std::uint8_t* up = y == 0 ? nullptr : plane.data() + (y - 1) * stride;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= bpp ? dst[i - bpp] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= bpp) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: parse_fail(idat_at, "unknown scanline filter");
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    RgbImage out;
    out.height = height;
    out.width = width;
    out.pixels.resize(static_cast<std::size_t>(height) * width * 3);
    for (std::size_t i = 0; i < static_cast<std::size_t>(height) * width; ++i) {
        const std::uint8_t* p = plane.data() + i * channels;
        if (channels <= 2) {
            out.pixels[3 * i] = p[0];
            out.pixels[3 * i + 1] = p[0];
            out.pixels[3 * i + 2] = p[0];
        } else {
            out.pixels[3 * i] = p[0];
            out.pixels[3 * i + 1] = p[1];
            out.pixels[3 * i + 2] = p[2];
        }
    }
    return out;
}

} // namespace invabc::img
