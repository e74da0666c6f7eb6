#ifndef PHI2_IO_HPP
#define PHI2_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phi2/dynamics.hpp"
#include "phi2/spectral.hpp"

namespace phi2 {

inline constexpr const char* kCodeVersion = "0.1.0";

// FNV-1a, used to stamp outputs with a config fingerprint
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace detail

// Binary field format: 16-byte header (magic "PHI2", u32 version, u32 d,
// u32 M), then L as f64, then M^d little-endian f64 coefficients in the
// sorted linearized mode order.
inline void write_field(std::ostream& os, const SpectralField& x) {
    os.write("PHI2", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(x.basis().dim()));
    detail::put_u32(os, static_cast<std::uint32_t>(x.basis().modes_per_dim()));
    detail::put_f64(os, x.basis().length());
    for (double c : x.coeffs()) detail::put_f64(os, c);
}

inline void write_field(const std::string& path, const SpectralField& x) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_field(os, x);
}

inline SpectralField read_field(std::istream& is,
                                std::shared_ptr<const SpectralBasis> basis = nullptr) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PHI2", 4) != 0)
        throw std::runtime_error("bad field file: missing PHI2 magic");
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1) throw std::runtime_error("unsupported field file version");
    const int d = static_cast<int>(detail::get_u32(is));
    const int M = static_cast<int>(detail::get_u32(is));
    const double L = detail::get_f64(is);
    if (!basis) basis = std::make_shared<SpectralBasis>(d, L, M);
    else if (basis->dim() != d || basis->modes_per_dim() != M)
        throw std::runtime_error("field file does not match the expected basis");
    SpectralField x(basis);
    for (auto& c : x.coeffs()) c = detail::get_f64(is);
    if (!is) throw std::runtime_error("truncated field file");
    return x;
}

inline SpectralField read_field(const std::string& path,
                                std::shared_ptr<const SpectralBasis> basis = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_field(is, std::move(basis));
}

// Trajectory container: field header once, then u32 state count, the time
// grid, and the coefficient blocks.
inline void write_trajectory(const std::string& path, const Trajectory& u) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write("PHI2", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(u.front().basis().dim()));
    detail::put_u32(os, static_cast<std::uint32_t>(u.front().basis().modes_per_dim()));
    detail::put_f64(os, u.front().basis().length());
    detail::put_u32(os, static_cast<std::uint32_t>(u.states.size()));
    for (double t : u.times) detail::put_f64(os, t);
    for (const auto& s : u.states)
        for (double c : s.coeffs()) detail::put_f64(os, c);
}

// Down-sampled scalar observables per output time.
inline void write_trajectory_csv(const std::string& path, const Trajectory& u, double hneg_s,
                                 const std::string& header_comment) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "# " << header_comment << "\n";
    os << "time,norm_H,norm_Hneg,max_abs\n";
    os.precision(17);
    for (std::size_t j = 0; j < u.states.size(); ++j) {
        const GridField g = to_grid(u.states[j]);
        os << u.times[j] << ',' << norm_H(u.states[j]) << ',' << norm_Hneg(u.states[j], hneg_s)
           << ',' << g.max_abs() << "\n";
    }
}

} // namespace phi2

#endif
