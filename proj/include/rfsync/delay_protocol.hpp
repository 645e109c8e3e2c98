#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsync/bargraph_codec.hpp"
#include "rfsync/clock_sync.hpp"
#include "rfsync/event_queue.hpp"
#include "rfsync/flooding.hpp"
#include "rfsync/radio_channel.hpp"

namespace rfsync {

struct ProtocolParams {
    SimTime tick = 42'000;                 // timestamp resolution
    SimTime tau_w = 192'000'000;           // request SFD rx -> response SFD tx
    double sfd_lag_nominal_s = 42e-9;      // calibrated detection lag
    double radio_range_m = 100.0;          // sanity bound on the last hop
    double sanity_margin_s = 84e-9;        // slack on both ends of the bound
    std::size_t response_payload_bytes = 127;
    unsigned threshold = bargraph::kDefaultThreshold;

    std::size_t response_nibbles() const { return response_payload_bytes * 2; }
};

// ---------------------------------------------------------------------------
// Wire format

/// CRC-16 used as the 802.15.4 FCS (CCITT polynomial, reflected, init 0).
inline std::uint16_t crc16_kermit(std::span<const std::uint8_t> data) {
    std::uint16_t crc = 0;
    for (auto b : data) {
        crc ^= b;
        for (int i = 0; i < 8; ++i) crc = (crc & 1) ? static_cast<std::uint16_t>((crc >> 1) ^ 0x8408) : crc >> 1;
    }
    return crc;
}

/// Round-trip request: [type][target hop][crc lo][crc hi].
struct DelayRequest {
    static constexpr std::uint8_t kType = 0x55;

    std::uint8_t packet_type = kType;
    std::uint8_t target_hop = 0;

    static DelayRequest from_initiator_hop(int hop) {
        if (hop < 1 || hop > 256) throw std::invalid_argument("initiator hop must be in [1, 256]");
        return {kType, static_cast<std::uint8_t>(hop - 1)};
    }

    std::array<std::uint8_t, 4> encode() const {
        const std::array<std::uint8_t, 2> body{packet_type, target_hop};
        const auto crc = crc16_kermit(body);
        return {packet_type, target_hop, static_cast<std::uint8_t>(crc & 0xff),
                static_cast<std::uint8_t>(crc >> 8)};
    }

    /// Nullopt on wrong length, type or CRC.
    static std::optional<DelayRequest> decode(std::span<const std::uint8_t> bytes) {
        if (bytes.size() != 4 || bytes[0] != kType) return std::nullopt;
        const auto crc = crc16_kermit(bytes.first(2));
        if (bytes[2] != (crc & 0xff) || bytes[3] != (crc >> 8)) return std::nullopt;
        return DelayRequest{bytes[0], bytes[1]};
    }

    NibblePayload payload() const {
        const auto b = encode();
        return NibblePayload::from_bytes(b);
    }

    friend bool operator==(const DelayRequest&, const DelayRequest&) = default;
};

// ---------------------------------------------------------------------------
// TDMA

inline std::size_t tdma_cycle_periods(std::size_t n, std::size_t s) {
    if (n < 1 || s < 1) throw std::invalid_argument("tdma: need n >= 1 and s >= 1");
    return (n + s - 1) / s;
}

/// Round robin over n participants with s slots per period: index of the
/// participant initiating in (period, slot).
inline std::size_t tdma_initiator(std::size_t period, std::size_t slot, std::size_t n, std::size_t s) {
    if (n < 1) throw std::invalid_argument("tdma: need at least one participant");
    if (s < 1 || s > n) throw std::invalid_argument("tdma: slots per period must be in [1, n]");
    if (slot >= s) throw std::invalid_argument("tdma: slot " + std::to_string(slot) + " >= s");
    return (period * s + slot) % n;
}

class TdmaSchedule {
public:
    TdmaSchedule(std::vector<NodeId> participants, std::size_t slots)
        : participants_(std::move(participants)), slots_(slots) {
        std::sort(participants_.begin(), participants_.end());
        if (participants_.empty()) throw std::invalid_argument("tdma: no participants");
        if (slots_ < 1 || slots_ > participants_.size())
            throw std::invalid_argument("tdma: slots per period (s = " + std::to_string(slots_)
                                        + ") must be in [1, n = "
                                        + std::to_string(participants_.size()) + "]");
    }

    NodeId initiator(std::size_t period, std::size_t slot) const {
        return participants_[tdma_initiator(period, slot, participants_.size(), slots_)];
    }

    std::size_t slots() const { return slots_; }
    std::size_t participants() const { return participants_.size(); }
    std::size_t cycle_periods() const { return tdma_cycle_periods(participants_.size(), slots_); }

private:
    std::vector<NodeId> participants_;
    std::size_t slots_;
};

// ---------------------------------------------------------------------------
// Delay arithmetic

struct RoundTripSample {
    std::int64_t tau_start = 0; // initiator ticks at request SFD tx
    std::int64_t tau_end = 0;   // initiator ticks at response SFD rx
    DecodeResult decoded;
};

struct DelayEstimate {
    double last_hop_s = 0.0;
    double cumulated_s = 0.0;
    std::size_t sample_index = 0;
};

/// Half the round trip once tau_w and the two nominal SFD detection lags
/// are removed. tau_start is latched on a counter edge while tau_end is a
/// truncated capture, so the tick count is read at mid-tick.
inline double last_hop_delay(const RoundTripSample& s, const ProtocolParams& p, double clock_rate = 1.0) {
    const double elapsed =
        (static_cast<double>(s.tau_end - s.tau_start) + 0.5) * seconds_from_ps(p.tick) / clock_rate;
    return (elapsed - seconds_from_ps(p.tau_w) - 2.0 * p.sfd_lag_nominal_s) / 2.0;
}

/// Accept iff the last-hop estimate lies within [0, range / c], widened by
/// the margin on both ends. The upper bound is inclusive.
inline bool sanity_check(double last_hop_s, const ProtocolParams& p) {
    return last_hop_s >= -p.sanity_margin_s
           && last_hop_s <= propagation_delay(p.radio_range_m) + p.sanity_margin_s;
}

inline DelayEstimate cumulate(double last_hop_s, unsigned decoded_ticks, SimTime tick,
                              std::size_t sample_index = 0) {
    return {last_hop_s, last_hop_s + decoded_ticks * seconds_from_ps(tick), sample_index};
}

/// round(cumulated / tick), clamped to what the payload can carry.
inline unsigned bar_value_for(double cumulated_s, SimTime tick, std::size_t payload_nibbles) {
    const double ticks = std::round(cumulated_s / seconds_from_ps(tick));
    if (!(ticks > 0)) return 0;
    return static_cast<unsigned>(std::min<double>(ticks, static_cast<double>(payload_nibbles)));
}

// ---------------------------------------------------------------------------
// Per-node protocol state

struct ProtocolNode {
    NodeId id = 0;
    int hop = 0;
    NodePosition position;
    HardwareClock clock;
    CompensationFilter filter;
    bool formed = false;
    std::optional<std::size_t> formed_period;
    std::size_t samples = 0;

    /// Value forwarded to the next hop: the filter output, 0 at the master.
    double forwarded_cumulated() const { return hop == 0 ? 0.0 : filter.applied(); }
};

/// Bar-graph response a node sends, or nullopt if it is not formed yet.
inline std::optional<NibblePayload> respond_cumulated(const ProtocolNode& node, const ProtocolParams& p) {
    if (!node.formed) return std::nullopt;
    return bargraph::encode(bar_value_for(node.forwarded_cumulated(), p.tick, p.response_nibbles()),
                            p.response_nibbles());
}

enum class MeasurementStatus : std::uint8_t { Sample, NoResponse, Lost, Invalid };

inline const char* to_string(MeasurementStatus s) {
    switch (s) {
    case MeasurementStatus::Sample: return "sample";
    case MeasurementStatus::NoResponse: return "no_response";
    case MeasurementStatus::Lost: return "lost";
    case MeasurementStatus::Invalid: return "invalid";
    }
    return "?";
}

struct ResponseRecord {
    NodeId responder = 0;
    int hop = 0;
    SimTime request_rx = 0;
    SimTime response_tx = 0;
    unsigned value = 0;
};

/// Everything that happened during one round-trip exchange.
struct MeasurementTrace {
    MeasurementStatus status = MeasurementStatus::NoResponse;
    NodeId initiator = 0;
    int target_hop = 0;
    SimTime request_tx = 0;
    std::vector<NodeId> request_heard_by;
    std::vector<ResponseRecord> responses;
    std::optional<ReceptionOutcome> response_outcome;
    std::optional<RoundTripSample> sample;
    unsigned expected_min = 0; // range of values sent by contributors
    unsigned expected_max = 0;
    std::size_t transmissions = 0;
    std::size_t receptions = 0;
    SimTime finished_at = 0;
};

/// Airtime of a frame: preamble + SFD + length byte + payload, in symbols.
inline SimTime frame_airtime(std::size_t payload_bytes, const RadioParams& radio) {
    const std::size_t bytes = 4 + 1 + 1 + payload_bytes;
    return ps_from_seconds(static_cast<double>(bytes * 2) * radio.symbol_duration_s);
}

/// One reserved-window exchange started by `initiator` no earlier than
/// `slot_start`: a request addressed to hop h-1, tau_w-delayed bar-graph
/// responses from formed nodes of that hop, and their fusion at the
/// initiator. `rng_for(node)` gives the random stream used at a receiver.
template <class RngFor>
MeasurementTrace initiate_measurement(NodeId initiator, [[maybe_unused]] const FloodingGraph& graph,
                                      std::span<const ProtocolNode> nodes, const ProtocolParams& p,
                                      const RadioParams& radio, SimTime slot_start, RngFor&& rng_for) {
    const ProtocolNode& me = nodes[initiator];
    if (me.hop < 1) throw std::invalid_argument("initiate_measurement: the master does not initiate");

    MeasurementTrace tr;
    tr.initiator = initiator;
    const DelayRequest req = DelayRequest::from_initiator_hop(me.hop);
    tr.target_hop = req.target_hop;
    tr.request_tx = me.clock.next_edge(slot_start);
    const std::int64_t tau_start = me.clock.ticks_at(tr.request_tx);

    EventQueue q;
    std::vector<TransmissionEvent> air;

    auto resolve_responses = [&](SimTime now) {
        tr.finished_at = now;
        ++tr.receptions;
        auto outcome = resolve_reception(me.position, air, radio, rng_for(initiator));
        std::vector<NodeId> senders = outcome.received() ? outcome.contributors : std::vector<NodeId>{};
        if (senders.empty())
            for (const auto& a : air) senders.push_back(a.sender);
        tr.expected_min = ~0u;
        tr.expected_max = 0;
        for (const auto& r : tr.responses)
            if (std::find(senders.begin(), senders.end(), r.responder) != senders.end()) {
                tr.expected_min = std::min(tr.expected_min, r.value);
                tr.expected_max = std::max(tr.expected_max, r.value);
            }
        if (!outcome.received()) {
            tr.status = MeasurementStatus::Lost;
        } else {
            RoundTripSample s{tau_start, me.clock.ticks_at(outcome.sfd_rx),
                              bargraph::decode(*outcome.payload, p.threshold)};
            tr.status = s.decoded.valid() ? MeasurementStatus::Sample : MeasurementStatus::Invalid;
            tr.sample = s;
        }
        tr.response_outcome = std::move(outcome);
    };

    q.schedule(tr.request_tx, [&](SimTime t_tx) {
        ++tr.transmissions;
        const TransmissionEvent request{initiator, me.position, PacketKind::DelayRequest, req.payload(), t_tx};
        for (const auto& node : nodes) {
            if (node.id == initiator || !in_range(me.position, node.position, radio)) continue;
            auto outcome = resolve_reception(node.position, std::span(&request, 1), radio, rng_for(node.id));
            ++tr.receptions;
            if (!outcome.received()) continue;
            const NodeId v = node.id;
            // Jitter may put the timestamp ahead of the transmit instant;
            // the handler still runs no earlier than the transmission.
            const SimTime t_rx = outcome.sfd_rx;
            q.schedule(std::max(t_rx, t_tx), [&, v, t_rx, payload = *outcome.payload](SimTime) {
                tr.request_heard_by.push_back(v);
                const auto decoded = DelayRequest::decode(payload.to_bytes());
                if (!decoded || nodes[v].hop != decoded->target_hop) return;
                const auto response = respond_cumulated(nodes[v], p);
                if (!response) return;
                const unsigned value = bar_value_for(nodes[v].forwarded_cumulated(), p.tick, p.response_nibbles());
                const SimTime t_resp = t_rx + p.tau_w;
                tr.responses.push_back({v, nodes[v].hop, t_rx, t_resp, value});
                q.schedule(t_resp, [&, v, payload = *response](SimTime t) {
                    ++tr.transmissions;
                    const bool first = air.empty();
                    air.push_back({v, nodes[v].position, PacketKind::DelayResponse, payload, t});
                    if (first)
                        q.schedule(t + frame_airtime(p.response_payload_bytes, radio), resolve_responses);
                });
            });
        }
    });
    q.run();

    if (air.empty()) {
        tr.status = MeasurementStatus::NoResponse;
        tr.finished_at = q.now();
    }
    return tr;
}

/// Fold a decoded round trip into the node's estimate. Returns the new
/// estimate, or nullopt if the sample fails decoding or the sanity check.
inline std::optional<DelayEstimate> absorb_sample(ProtocolNode& node, const RoundTripSample& s,
                                                  const ProtocolParams& p) {
    if (!s.decoded.valid()) return std::nullopt;
    const double last_hop = last_hop_delay(s, p, node.clock.rate());
    if (!sanity_check(last_hop, p)) return std::nullopt;
    DelayEstimate est = cumulate(last_hop, *s.decoded.value, p.tick, node.samples);
    node.filter.update(est.cumulated_s);
    ++node.samples;
    node.formed = true;
    return est;
}

} // namespace rfsync
