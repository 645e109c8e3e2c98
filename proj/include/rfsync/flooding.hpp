#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsync/radio_channel.hpp"

namespace rfsync {

class TopologyError : public std::runtime_error {
public:
    TopologyError(NodeId node, const std::string& what)
        : std::runtime_error("node " + std::to_string(node) + ": " + what), node_(node) {}
    NodeId node() const { return node_; }

private:
    NodeId node_;
};

/// Hop layering of a static network. Node ids are indices into `positions`.
/// Edges go from hop h to in-range nodes at hop h+1 only, so a node may
/// have several incoming edges.
struct FloodingGraph {
    std::vector<NodePosition> positions;
    NodeId master = 0;
    std::vector<int> hop;
    std::vector<std::vector<NodeId>> in_edges;  // previous-hop in-range nodes, sorted
    std::vector<std::vector<NodeId>> out_edges; // next-hop in-range nodes, sorted

    std::size_t size() const { return positions.size(); }
    int max_hop() const { return hop.empty() ? 0 : *std::max_element(hop.begin(), hop.end()); }

    double link_distance(NodeId a, NodeId b) const { return distance(positions[a], positions[b]); }

    std::vector<NodeId> nodes_at_hop(int h) const {
        std::vector<NodeId> out;
        for (NodeId i = 0; i < size(); ++i)
            if (hop[i] == h) out.push_back(i);
        return out;
    }
};

/// BFS over radio-range links from the master.
inline FloodingGraph assign_hops(std::span<const NodePosition> positions, NodeId master,
                                 const RadioParams& params) {
    if (positions.empty()) throw std::invalid_argument("assign_hops: empty topology");
    if (master >= positions.size()) throw std::invalid_argument("assign_hops: master id out of range");
    for (NodeId i = 0; i < positions.size(); ++i)
        if (!std::isfinite(positions[i].x) || !std::isfinite(positions[i].y))
            throw TopologyError(i, "non-finite position");

    FloodingGraph g;
    g.positions.assign(positions.begin(), positions.end());
    g.master = master;
    const std::size_t n = positions.size();
    g.hop.assign(n, -1);
    g.in_edges.assign(n, {});
    g.out_edges.assign(n, {});

    std::deque<NodeId> queue{master};
    g.hop[master] = 0;
    while (!queue.empty()) {
        const NodeId u = queue.front();
        queue.pop_front();
        for (NodeId v = 0; v < n; ++v) {
            if (g.hop[v] >= 0 || !in_range(positions[u], positions[v], params)) continue;
            g.hop[v] = g.hop[u] + 1;
            queue.push_back(v);
        }
    }
    for (NodeId v = 0; v < n; ++v)
        if (g.hop[v] < 0) throw TopologyError(v, "not reachable from the master within radio range");

    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = 0; v < n; ++v)
            if (g.hop[v] == g.hop[u] + 1 && in_range(positions[u], positions[v], params)) {
                g.out_edges[u].push_back(v);
                g.in_edges[v].push_back(u);
            }
    return g;
}

struct PredecessorSet {
    NodeId node = 0;
    std::vector<NodeId> members; // sorted
};

/// Previous-hop neighbours received within capture_window dB of the
/// strongest one. Boundary-equal powers are members.
inline PredecessorSet predecessor_set(NodeId node, const FloodingGraph& graph,
                                      const RadioParams& params) {
    if (node >= graph.size()) throw std::invalid_argument("predecessor_set: unknown node");
    if (graph.hop[node] < 1) throw std::invalid_argument("predecessor_set: master has no predecessors");
    const auto& cand = graph.in_edges[node];
    std::vector<double> power;
    double strongest = -std::numeric_limits<double>::infinity();
    for (NodeId p : cand) {
        const double d = std::max(graph.link_distance(p, node), detail::kMinLinkDistance);
        power.push_back(received_power(params.tx_power_dbm, d, params.path_loss_exponent));
        strongest = std::max(strongest, power.back());
    }
    PredecessorSet set{node, {}};
    for (std::size_t k = 0; k < cand.size(); ++k)
        if (power[k] >= strongest - params.capture_window_db) set.members.push_back(cand[k]);
    return set;
}

/// Adjacency dump: one line per node, "node hop x y preds=a,b".
inline void write_topology(std::ostream& os, const FloodingGraph& graph, const RadioParams& params) {
    os << "# node hop x_m y_m predecessors\n";
    for (NodeId i = 0; i < graph.size(); ++i) {
        os << i << ' ' << graph.hop[i] << ' ' << graph.positions[i].x << ' ' << graph.positions[i].y
           << " preds=";
        if (graph.hop[i] >= 1) {
            const auto ps = predecessor_set(i, graph, params);
            for (std::size_t k = 0; k < ps.members.size(); ++k)
                os << (k ? "," : "") << ps.members[k];
        } else {
            os << '-';
        }
        os << '\n';
    }
}

struct FloodReception {
    bool received = false;
    ReceptionKind kind = ReceptionKind::Lost;
    SimTime arrival = 0;    // SFD reception event, true time
    SimTime true_delay = 0; // propagation along the path that set the arrival
    /// arrival minus the instant a node would expect with zero propagation
    /// delay and nominal detection lag: what the sync scheme mistakes for
    /// master time.
    SimTime timing_offset = 0;
    std::vector<NodeId> contributors;
};

/// Flood payload: [type][hop], identical for every sender of one hop.
inline NibblePayload flood_payload(int hop) {
    return NibblePayload::from_bytes(std::vector<std::uint8_t>{0xf1, static_cast<std::uint8_t>(hop)});
}

/// Hop-by-hop relay of one synchronization flood. Each receiver relays
/// `relay_delay` after its own SFD reception event. `rng_for(node)` yields
/// the random stream used at that receiver.
template <class RngFor>
std::vector<FloodReception> simulate_flood(const FloodingGraph& graph, SimTime master_time,
                                           const RadioParams& params, SimTime relay_delay,
                                           RngFor&& rng_for) {
    const std::size_t n = graph.size();
    std::vector<FloodReception> rx(n);
    rx[graph.master] = {true, ReceptionKind::Clean, master_time, 0, 0, {}};
    const SimTime lag = ps_from_seconds(params.sfd_detection_lag_s);
    const SimTime excess = ps_from_seconds(params.excess_path_delay_s);
    auto relay_time = [&](NodeId u) {
        return u == graph.master ? master_time : rx[u].arrival + relay_delay;
    };

    const int hmax = graph.max_hop();
    for (int h = 1; h <= hmax; ++h) {
        for (NodeId v : graph.nodes_at_hop(h)) {
            std::vector<TransmissionEvent> air;
            for (NodeId u : graph.in_edges[v]) {
                if (!rx[u].received) continue;
                air.push_back({u, graph.positions[u], PacketKind::Flood, flood_payload(h - 1),
                               relay_time(u)});
            }
            if (air.empty()) continue;
            const auto outcome = resolve_reception(graph.positions[v], air, params, rng_for(v));
            auto& r = rx[v];
            r.kind = outcome.kind;
            r.contributors = outcome.contributors;
            if (!outcome.received()) continue;
            r.received = true;
            r.arrival = outcome.sfd_rx;

            SimTime best = std::numeric_limits<SimTime>::max();
            for (NodeId u : outcome.contributors) {
                const SimTime hop_delay = propagation_delay_ps(graph.link_distance(u, v)) + excess;
                if (relay_time(u) + hop_delay < best) {
                    best = relay_time(u) + hop_delay;
                    r.true_delay = rx[u].true_delay + hop_delay;
                }
            }
            r.timing_offset = r.arrival - (master_time + h * lag + (h - 1) * relay_delay);
        }
    }
    return rx;
}

inline std::vector<FloodReception> simulate_flood(const FloodingGraph& graph, SimTime master_time,
                                                  const RadioParams& params, SimTime relay_delay,
                                                  Rng& rng) {
    return simulate_flood(graph, master_time, params, relay_delay, [&](NodeId) -> Rng& { return rng; });
}

} // namespace rfsync
