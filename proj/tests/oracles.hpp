#pragma once

// Independent reference implementations used as test oracles. They are
// written from the textual definitions, deliberately not sharing code with
// the library.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

/// Boundary-scan decoder over a character string: 'F' for 0xf, '0' for 0x0,
/// anything else for the remaining nibbles.
inline std::optional<unsigned> decode(const std::vector<std::uint8_t>& nib, unsigned threshold) {
    std::string s;
    for (auto n : nib) s.push_back(n == 0xf ? 'F' : n == 0 ? '0' : 'x');
    const std::string padded_right = s + "0";
    const std::string padded_left = "F" + s;
    std::size_t left = s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
        if (padded_right[i] != 'F' && padded_right[i + 1] != 'F') {
            left = i;
            break;
        }
    // right counts nibbles up to and including the last nonzero pair
    std::size_t right = 0;
    for (std::size_t j = s.size(); j >= 1; --j)
        if (padded_left[j] != '0' && padded_left[j - 1] != '0') {
            right = j;
            break;
        }
    const long diff = static_cast<long>(left) - static_cast<long>(right);
    if (static_cast<unsigned long>(std::labs(diff)) > threshold) return std::nullopt;
    const double avg = (static_cast<double>(left) + static_cast<double>(right)) / 2.0;
    return static_cast<unsigned>(std::floor(avg + 0.5));
}

inline std::vector<std::uint8_t> bar(unsigned v, std::size_t n) {
    std::vector<std::uint8_t> out(n, 0);
    for (unsigned i = 0; i < v; ++i) out[i] = 0xf;
    return out;
}

/// CRC-16 with polynomial x^16 + x^12 + x^5 + 1 computed MSB-first on
/// bit-reversed input, then reflected: equivalent to the reflected LSB-first
/// form but derived independently.
inline std::uint16_t crc16_reflected(const std::vector<std::uint8_t>& data) {
    auto reflect = [](std::uint32_t x, int bits) {
        std::uint32_t r = 0;
        for (int i = 0; i < bits; ++i)
            if (x & (1u << i)) r |= 1u << (bits - 1 - i);
        return r;
    };
    std::uint32_t crc = 0;
    for (auto b : data) {
        crc ^= reflect(b, 8) << 8;
        for (int i = 0; i < 8; ++i) crc = (crc & 0x8000) ? ((crc << 1) ^ 0x1021) & 0xffff : (crc << 1) & 0xffff;
    }
    return static_cast<std::uint16_t>(reflect(crc, 16));
}

inline constexpr double c = 299792458.0;

/// Closed-form round trip of one request/response exchange in picoseconds:
/// both SFD events share the same lag, the responder waits exactly tau_w.
inline double round_trip_ps(double distance_m, double tau_w_ps, double lag_ps) {
    return 2.0 * (distance_m / c * 1e12 + lag_ps) + tau_w_ps;
}

} // namespace oracle
