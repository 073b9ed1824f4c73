#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mdn/errors.hpp"

// Little-endian primitives for the binary file formats.

namespace mdn::binio {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& in, const std::string& context) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw IoError(msg(context, ": truncated payload"));
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& context) {
    const std::uint64_t lo = get_u32(in, context);
    const std::uint64_t hi = get_u32(in, context);
    return lo | (hi << 32);
}

inline float get_f32(std::istream& in, const std::string& context) {
    const std::uint32_t v = get_u32(in, context);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

inline std::string get_string(std::istream& in, const std::string& context,
                              std::uint32_t max_len = 4096) {
    const std::uint32_t len = get_u32(in, context);
    if (len > max_len) throw IoError(msg(context, ": corrupt string length"));
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (static_cast<std::uint32_t>(in.gcount()) != len)
        throw IoError(msg(context, ": truncated payload"));
    return s;
}

}  // namespace mdn::binio
