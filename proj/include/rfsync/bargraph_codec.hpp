#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsync/rng.hpp"

namespace rfsync {

/// Payload of an 802.15.4-style frame as a sequence of 4-bit nibbles.
///
/// Byte layout: nibble i sits in the high half of byte i/2 when i is even,
/// in the low half when i is odd. A payload is 1 to 127 whole bytes.
class NibblePayload {
public:
    static constexpr std::size_t kMinNibbles = 2;
    static constexpr std::size_t kMaxNibbles = 254;

    NibblePayload() = default;

    explicit NibblePayload(std::vector<std::uint8_t> nibbles) : nibbles_(std::move(nibbles)) {
        validate();
    }

    static NibblePayload from_bytes(std::span<const std::uint8_t> bytes) {
        std::vector<std::uint8_t> n;
        n.reserve(bytes.size() * 2);
        for (auto b : bytes) {
            n.push_back(static_cast<std::uint8_t>(b >> 4));
            n.push_back(static_cast<std::uint8_t>(b & 0x0f));
        }
        return NibblePayload(std::move(n));
    }

    std::vector<std::uint8_t> to_bytes() const {
        std::vector<std::uint8_t> out(nibbles_.size() / 2);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<std::uint8_t>((nibbles_[2 * i] << 4) | nibbles_[2 * i + 1]);
        return out;
    }

    /// Lowercase hex, bytes separated by spaces: "ff ff f0 00".
    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string s;
        for (std::size_t i = 0; i < nibbles_.size(); ++i) {
            if (i > 0 && i % 2 == 0) s.push_back(' ');
            s.push_back(digits[nibbles_[i]]);
        }
        return s;
    }

    std::size_t size() const { return nibbles_.size(); }
    std::size_t byte_size() const { return nibbles_.size() / 2; }
    std::uint8_t operator[](std::size_t i) const { return nibbles_[i]; }
    std::span<const std::uint8_t> nibbles() const { return nibbles_; }

    friend bool operator==(const NibblePayload&, const NibblePayload&) = default;

private:
    void validate() const {
        if (nibbles_.size() % 2 != 0)
            throw std::invalid_argument("payload must hold whole bytes (even nibble count)");
        if (nibbles_.size() < kMinNibbles || nibbles_.size() > kMaxNibbles)
            throw std::invalid_argument("payload must be 1 to 127 bytes, got "
                                        + std::to_string(nibbles_.size()) + " nibbles");
        for (auto n : nibbles_)
            if (n > 0x0f) throw std::invalid_argument("nibble value out of range");
    }

    std::vector<std::uint8_t> nibbles_;
};

/// Result of decoding a bar-graph payload. `left`/`right` are the two
/// boundaries found by the scan, kept for diagnostics.
struct DecodeResult {
    std::optional<unsigned> value;
    std::size_t left = 0;
    std::size_t right = 0;

    bool valid() const { return value.has_value(); }
    static DecodeResult invalid(std::size_t l, std::size_t r) { return {std::nullopt, l, r}; }
};

namespace bargraph {

inline constexpr std::uint8_t kOn = 0x0f;
inline constexpr std::uint8_t kOff = 0x00;
inline constexpr unsigned kDefaultThreshold = 16;
inline constexpr double kDefaultFlipOtherProb = 0.01;

/// `value` leading 0xf nibbles followed by 0x0 up to `payload_nibbles`.
inline NibblePayload encode(unsigned value, std::size_t payload_nibbles) {
    if (value > payload_nibbles)
        throw std::invalid_argument("bar value " + std::to_string(value) + " exceeds payload of "
                                    + std::to_string(payload_nibbles) + " nibbles");
    std::vector<std::uint8_t> n(payload_nibbles, kOff);
    for (unsigned i = 0; i < value; ++i) n[i] = kOn;
    return NibblePayload(std::move(n));
}

/// Channel-level fusion of concurrently transmitted payloads. Positions
/// where every input agrees come through intact; elsewhere the receiver
/// sees 0x0 or 0xf at random, or rarely some other nibble.
inline NibblePayload merge_channel(std::span<const NibblePayload> payloads, Rng& rng,
                                   double flip_other_prob = kDefaultFlipOtherProb) {
    if (payloads.empty()) throw std::invalid_argument("merge_channel: no payloads");
    const std::size_t len = payloads.front().size();
    for (const auto& p : payloads)
        if (p.size() != len) throw std::invalid_argument("merge_channel: payload length mismatch");
    if (payloads.size() == 1) return payloads.front();

    std::vector<std::uint8_t> out(len);
    for (std::size_t i = 0; i < len; ++i) {
        const std::uint8_t first = payloads.front()[i];
        bool agree = true;
        for (const auto& p : payloads.subspan(1))
            if (p[i] != first) {
                agree = false;
                break;
            }
        if (agree) {
            out[i] = first;
        } else if (rng.bernoulli(flip_other_prob)) {
            // one of the 14 values that are neither 0x0 nor 0xf
            out[i] = static_cast<std::uint8_t>(1 + rng.below(14));
        } else {
            out[i] = rng.bernoulli(0.5) ? kOn : kOff;
        }
    }
    return NibblePayload(std::move(out));
}

inline NibblePayload merge_channel(std::initializer_list<NibblePayload> payloads, Rng& rng,
                                   double flip_other_prob = kDefaultFlipOtherProb) {
    return merge_channel(std::span<const NibblePayload>(payloads.begin(), payloads.size()), rng,
                         flip_other_prob);
}

/// Two-sided boundary scan.
///
/// left:  first index i with nibble[i] != 0xf and nibble[i+1] != 0xf, the
///        position past the end counting as 0x0; payload size if none.
/// right: one past the last index j with nibble[j] != 0x0 and
///        nibble[j-1] != 0x0, the position before the start counting as
///        0xf; 0 if none.
/// Boundaries farther apart than `threshold` mark the packet invalid,
/// otherwise the midpoint (rounded half up) is the value.
inline DecodeResult decode(const NibblePayload& payload, unsigned threshold = kDefaultThreshold) {
    const std::size_t n = payload.size();

    std::size_t left = n;
    for (std::size_t i = 0; i < n; ++i) {
        const bool here = payload[i] != kOn;
        const bool next = (i + 1 == n) || payload[i + 1] != kOn;
        if (here && next) {
            left = i;
            break;
        }
    }

    std::size_t right = 0;
    for (std::size_t j = n; j-- > 0;) {
        const bool here = payload[j] != kOff;
        const bool prev = (j == 0) || payload[j - 1] != kOff;
        if (here && prev) {
            right = j + 1;
            break;
        }
    }

    const std::size_t spread = left > right ? left - right : right - left;
    if (spread > threshold) return DecodeResult::invalid(left, right);
    return {static_cast<unsigned>((left + right + 1) / 2), left, right};
}

} // namespace bargraph
} // namespace rfsync
