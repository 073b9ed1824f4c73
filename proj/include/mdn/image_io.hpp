#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mdn/errors.hpp"
#include "mdn/fft.hpp"

namespace mdn {

/// Raw grayscale image as read from a portable graymap, before any
/// normalization policy is applied.
struct GrayImage {
    int height = 0;
    int width = 0;
    int maxval = 0;
    std::vector<std::uint16_t> pixels;
};

namespace detail {

inline int pgm_next_int(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines, per the netpbm grammar.
    int c;
    while ((c = in.peek()) != EOF) {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value;
    if (!(in >> value))
        throw IoError(msg("'", path, "': malformed graymap header"));
    return value;
}

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline std::uint32_t get_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline void put_f32_le(std::ostream& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32_le(out, v);
}

inline float get_f32_le(std::istream& in) {
    std::uint32_t v = get_u32_le(in);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace detail

/// Reads an 8- or 16-bit portable graymap (P2 ASCII or P5 binary).
inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(msg("cannot open image '", path, "'"));
    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P5")
        throw IoError(msg("'", path, "': unsupported format '", magic,
                          "' (expected P2 or P5 graymap)"));
    GrayImage img;
    img.width = detail::pgm_next_int(in, path);
    img.height = detail::pgm_next_int(in, path);
    img.maxval = detail::pgm_next_int(in, path);
    if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535)
        throw IoError(msg("'", path, "': invalid graymap header"));
    const std::size_t count = std::size_t(img.width) * img.height;
    img.pixels.resize(count);
    if (magic == "P2") {
        for (std::size_t i = 0; i < count; ++i) {
            int v;
            if (!(in >> v) || v < 0 || v > img.maxval)
                throw IoError(msg("'", path, "': truncated or out-of-range pixel"));
            img.pixels[i] = static_cast<std::uint16_t>(v);
        }
    } else {
        in.get();  // single whitespace after maxval
        const int bytes = img.maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(count * bytes);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw IoError(msg("'", path, "': truncated pixel payload"));
        for (std::size_t i = 0; i < count; ++i) {
            // 16-bit samples are big-endian in binary graymaps.
            img.pixels[i] = bytes == 2 ? static_cast<std::uint16_t>(
                                             (raw[2 * i] << 8) | raw[2 * i + 1])
                                       : raw[i];
        }
    }
    return img;
}

/// Writes values in [0,1] as a graymap; maxval 255 or 65535.
inline void write_pgm(const std::string& path, int height, int width,
                      const float* values, int maxval = 255) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(msg("cannot write image '", path, "'"));
    out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
    const std::size_t count = std::size_t(width) * height;
    for (std::size_t i = 0; i < count; ++i) {
        const float clamped = std::clamp(values[i], 0.0f, 1.0f);
        const int v = static_cast<int>(std::lround(clamped * maxval));
        if (maxval > 255) out.put(char((v >> 8) & 0xff));
        out.put(char(v & 0xff));
    }
    if (!out) throw IoError(msg("failed while writing image '", path, "'"));
}

/// Binary complex image: magic CIMG, u32 height, u32 width, then row-major
/// interleaved (real, imag) float32, all little-endian.
inline void write_cimg(const std::string& path, const ComplexImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(msg("cannot write complex image '", path, "'"));
    out.write("CIMG", 4);
    detail::put_u32_le(out, static_cast<std::uint32_t>(image.height));
    detail::put_u32_le(out, static_cast<std::uint32_t>(image.width));
    for (const auto& z : image.data) {
        detail::put_f32_le(out, z.real());
        detail::put_f32_le(out, z.imag());
    }
    if (!out) throw IoError(msg("failed while writing complex image '", path, "'"));
}

inline ComplexImage read_cimg(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(msg("cannot open complex image '", path, "'"));
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "CIMG")
        throw IoError(msg("'", path, "' is not a complex image (bad magic)"));
    const std::uint32_t h = detail::get_u32_le(in);
    const std::uint32_t w = detail::get_u32_le(in);
    if (!in || h == 0 || w == 0 || h > 1u << 20 || w > 1u << 20)
        throw IoError(msg("'", path, "': invalid complex image header"));
    ComplexImage image(static_cast<int>(h), static_cast<int>(w));
    for (auto& z : image.data) {
        const float re = detail::get_f32_le(in);
        const float im = detail::get_f32_le(in);
        z = std::complex<float>(re, im);
    }
    if (!in) throw IoError(msg("'", path, "': truncated complex image payload"));
    return image;
}

}  // namespace mdn
