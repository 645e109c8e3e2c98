#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsync/bargraph_codec.hpp"
#include "rfsync/rng.hpp"
#include "rfsync/units.hpp"

namespace rfsync {

using NodeId = std::uint32_t;

struct NodePosition {
    double x = 0.0; // m
    double y = 0.0; // m

    friend bool operator==(const NodePosition&, const NodePosition&) = default;
};

inline double distance(const NodePosition& a, const NodePosition& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Network-wide radio configuration. There is a single transmit power for
/// every node; the capture partition relies on it.
struct RadioParams {
    double tx_power_dbm = 0.0;
    double radio_range_m = 100.0;
    double path_loss_exponent = 2.0;
    double capture_window_db = 5.0;
    double skew_tolerance_s = 0.5e-6;
    double symbol_duration_s = 16e-6;
    double sfd_detection_lag_s = 42e-9;
    double sfd_jitter_std_s = 42e-9;
    /// Probability that a disagreeing nibble comes out as neither 0x0 nor 0xf.
    double flip_other_prob = bargraph::kDefaultFlipOtherProb;
    /// Constant extra delay on every link (obstructed line of sight).
    double excess_path_delay_s = 0.0;

    /// Returns a list of violated constraints, empty if valid.
    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!std::isfinite(tx_power_dbm)) v.emplace_back("tx_power must be finite");
        if (!(radio_range_m > 0)) v.emplace_back("radio_range must be > 0");
        if (!(path_loss_exponent > 0)) v.emplace_back("path_loss_exponent must be > 0");
        if (!(capture_window_db > 0)) v.emplace_back("capture_window must be > 0 dB");
        if (!(skew_tolerance_s > 0)) v.emplace_back("skew_tolerance must be > 0");
        if (!(symbol_duration_s > 0)) v.emplace_back("symbol_duration must be > 0");
        if (!(sfd_detection_lag_s >= 0)) v.emplace_back("sfd_detection_lag must be >= 0");
        if (!(sfd_jitter_std_s >= 0)) v.emplace_back("sfd_jitter_std must be >= 0");
        if (!(flip_other_prob >= 0 && flip_other_prob <= 1))
            v.emplace_back("flip_other_prob must be in [0, 1]");
        if (!(excess_path_delay_s >= 0)) v.emplace_back("excess_path_delay must be >= 0");
        return v;
    }
};

/// One tx power for the whole network. Per-node powers are accepted only if
/// they all agree, in which case that common value is returned.
inline double uniform_tx_power(std::span<const double> per_node_dbm) {
    if (per_node_dbm.empty()) throw std::invalid_argument("no transmit powers given");
    for (double p : per_node_dbm)
        if (p != per_node_dbm.front())
            throw std::invalid_argument("per-node transmit power overrides are not supported: "
                                        "all nodes must transmit with the same power");
    return per_node_dbm.front();
}

inline double propagation_delay(double distance_m) {
    if (!(distance_m >= 0)) throw std::invalid_argument("propagation_delay: negative distance");
    return distance_m / kSpeedOfLight;
}

inline SimTime propagation_delay_ps(double distance_m) {
    return ps_from_seconds(propagation_delay(distance_m));
}

/// Log-distance path loss with reference distance 1 m.
inline double received_power(double tx_power_dbm, double distance_m, double exponent) {
    if (!(distance_m > 0)) throw std::invalid_argument("received_power: distance must be > 0");
    return tx_power_dbm - 10.0 * exponent * std::log10(distance_m);
}

inline bool in_range(const NodePosition& a, const NodePosition& b, const RadioParams& params) {
    return distance(a, b) <= params.radio_range_m;
}

enum class PacketKind : std::uint8_t { Flood, DelayRequest, DelayResponse, Bargraph };

/// Frames of these kinds carry a CRC: a corrupted merge is dropped.
inline constexpr bool has_crc(PacketKind k) {
    return k == PacketKind::Flood || k == PacketKind::DelayRequest;
}

struct TransmissionEvent {
    NodeId sender = 0;
    NodePosition position;
    PacketKind kind = PacketKind::Flood;
    NibblePayload payload;
    SimTime sfd_tx = 0; // last SFD bit leaving the antenna, true time
};

enum class ReceptionKind : std::uint8_t { Clean, Constructive, Captured, Lost };

inline const char* to_string(ReceptionKind k) {
    switch (k) {
    case ReceptionKind::Clean: return "clean";
    case ReceptionKind::Constructive: return "constructive";
    case ReceptionKind::Captured: return "captured";
    case ReceptionKind::Lost: return "lost";
    }
    return "?";
}

struct ReceptionOutcome {
    ReceptionKind kind = ReceptionKind::Lost;
    std::vector<NodeId> contributors; // sorted
    std::vector<NodeId> shadowed;     // sorted
    std::optional<NibblePayload> payload;
    PacketKind packet = PacketKind::Flood;
    SimTime sfd_rx = 0;

    bool received() const { return kind != ReceptionKind::Lost; }
};

namespace detail {
// Path loss of colocated nodes is evaluated at 1 cm.
inline constexpr double kMinLinkDistance = 0.01;
} // namespace detail

/// Decide what a receiver at `receiver` observes when the given frames
/// overlap in the air.
///
/// Senders within capture_window dB of the strongest signal contribute;
/// weaker ones are shadowed. Contributors must share a frame type and start
/// within skew_tolerance of each other, otherwise the frame is lost.
/// Contributor payloads are fused nibble-wise; for CRC-protected frames any
/// disagreement is a loss. The SFD is detected on the earliest contributor
/// arrival plus the detection lag and Gaussian jitter.
inline ReceptionOutcome resolve_reception(const NodePosition& receiver,
                                          std::span<const TransmissionEvent> concurrent,
                                          const RadioParams& params, Rng& rng) {
    if (concurrent.empty()) throw std::invalid_argument("resolve_reception: no transmissions");

    struct Heard {
        const TransmissionEvent* tx;
        double power;
        SimTime arrival;
    };
    std::vector<Heard> heard;
    heard.reserve(concurrent.size());
    const SimTime excess = ps_from_seconds(params.excess_path_delay_s);
    for (const auto& tx : concurrent) {
        const double d = distance(receiver, tx.position);
        const double d_power = std::max(d, detail::kMinLinkDistance);
        heard.push_back({&tx, received_power(params.tx_power_dbm, d_power, params.path_loss_exponent),
                         tx.sfd_tx + propagation_delay_ps(d) + excess});
    }
    std::sort(heard.begin(), heard.end(),
              [](const Heard& a, const Heard& b) { return a.tx->sender < b.tx->sender; });

    ReceptionOutcome out;
    double strongest = -std::numeric_limits<double>::infinity();
    for (const auto& h : heard) strongest = std::max(strongest, h.power);

    std::vector<const Heard*> contrib;
    for (const auto& h : heard) {
        if (h.power >= strongest - params.capture_window_db) {
            contrib.push_back(&h);
            out.contributors.push_back(h.tx->sender);
        } else {
            out.shadowed.push_back(h.tx->sender);
        }
    }

    const SimTime jitter = ps_from_seconds(rng.normal(0.0, params.sfd_jitter_std_s));
    const SimTime lag = ps_from_seconds(params.sfd_detection_lag_s);

    out.packet = contrib.front()->tx->kind;
    SimTime first_tx = contrib.front()->tx->sfd_tx, last_tx = first_tx;
    SimTime first_arrival = contrib.front()->arrival;
    bool same_kind = true;
    for (const Heard* h : contrib) {
        first_tx = std::min(first_tx, h->tx->sfd_tx);
        last_tx = std::max(last_tx, h->tx->sfd_tx);
        first_arrival = std::min(first_arrival, h->arrival);
        same_kind = same_kind && h->tx->kind == out.packet;
    }
    out.sfd_rx = first_arrival + lag + jitter;

    if (!same_kind || seconds_from_ps(last_tx - first_tx) > params.skew_tolerance_s) {
        out.kind = ReceptionKind::Lost;
        return out;
    }

    if (heard.size() == 1) {
        out.kind = ReceptionKind::Clean;
        out.payload = heard.front().tx->payload;
        return out;
    }

    std::vector<NibblePayload> payloads;
    payloads.reserve(contrib.size());
    for (const Heard* h : contrib) payloads.push_back(h->tx->payload);
    const bool all_equal = std::all_of(payloads.begin(), payloads.end(),
                                       [&](const NibblePayload& p) { return p == payloads.front(); });
    if (!all_equal) {
        const std::size_t len = payloads.front().size();
        const bool same_len = std::all_of(payloads.begin(), payloads.end(),
                                          [&](const NibblePayload& p) { return p.size() == len; });
        if (has_crc(out.packet) || !same_len) {
            out.kind = ReceptionKind::Lost;
            return out;
        }
    }
    out.payload = all_equal ? payloads.front()
                            : bargraph::merge_channel(payloads, rng, params.flip_other_prob);
    out.kind = out.shadowed.empty() ? ReceptionKind::Constructive : ReceptionKind::Captured;
    return out;
}

} // namespace rfsync
