#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/errors.hpp"

namespace hdrnn::binio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
inline T to_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64s(std::ostream& os, std::span<const double> values) {
    for (double d : values) {
        auto u = to_le(std::bit_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& is, void* dst, std::size_t n) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError("unexpected end of binary stream");
}

inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v;
    read_exact(is, &v, sizeof v);
    return to_le(v);
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v;
    read_exact(is, &v, sizeof v);
    return to_le(v);
}

inline void read_f64s(std::istream& is, std::span<double> out) {
    for (double& d : out) {
        std::uint64_t u;
        read_exact(is, &u, sizeof u);
        d = std::bit_cast<double>(to_le(u));
    }
}

inline std::string read_string(std::istream& is) {
    const auto n = read_u32(is);
    std::string s(n, '\0');
    read_exact(is, s.data(), n);
    return s;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    std::string got(magic.size(), '\0');
    read_exact(is, got.data(), got.size());
    if (got != magic) throw FormatError("bad magic: expected '" + std::string(magic) + "'");
}

} // namespace hdrnn::binio
