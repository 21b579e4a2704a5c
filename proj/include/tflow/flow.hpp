#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "core_types.hpp"
#include "errors.hpp"
#include "numfmt.hpp"

namespace tflow {

enum class EdgeKind { det, init, term, link };

inline const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::det: return "det";
        case EdgeKind::init: return "init";
        case EdgeKind::term: return "term";
        case EdgeKind::link: return "link";
    }
    return "?";
}

/// One flow variable. `from`/`to` are local node indices; det/init/term edges
/// have from == to. For link edges `dt` is the frame gap between the tail of
/// `from` and the head of `to`.
struct FlowEdge {
    EdgeKind kind = EdgeKind::det;
    int from = 0;
    int to = 0;
    double cost = 0.0;
    double weight = 1.0;
    std::optional<int> gt;
    int dt = 0;
};

/// Tracklet flow graph. Edge order is the flattened variable layout
/// [det_0, init_0, term_0, det_1, init_1, term_1, ..., link, link, ...].
struct FlowGraph {
    /// Tracklet id of each local node.
    std::vector<int> nodes;
    std::vector<int> first_frame;
    std::vector<int> last_frame;
    std::vector<int> length;
    std::vector<FlowEdge> edges;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t det_edge(std::size_t node) const { return 3 * node; }
    std::size_t init_edge(std::size_t node) const { return 3 * node + 1; }
    std::size_t term_edge(std::size_t node) const { return 3 * node + 2; }
    std::size_t first_link() const { return 3 * nodes.size(); }
    std::size_t link_count() const { return edges.size() - first_link(); }
};

/// Nodes for every tracklet (in the given order) plus one link edge per
/// ordered pair whose tail-to-head gap lies in [1, dt_max]. Init and term
/// edges carry `beta`; det and link costs start at zero.
inline FlowGraph build_graph(const std::vector<const Tracklet*>& tracklets, int dt_max, double beta) {
    FlowGraph g;
    for (const Tracklet* t : tracklets) {
        const int node = static_cast<int>(g.nodes.size());
        g.nodes.push_back(t->id);
        g.first_frame.push_back(t->first_frame());
        g.last_frame.push_back(t->last_frame());
        g.length.push_back(t->length());
        g.edges.push_back({EdgeKind::det, node, node, 0.0, 1.0, {}, 0});
        g.edges.push_back({EdgeKind::init, node, node, beta, 1.0, {}, 0});
        g.edges.push_back({EdgeKind::term, node, node, beta, 1.0, {}, 0});
    }
    const int n = static_cast<int>(g.nodes.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int dt = g.first_frame[j] - g.last_frame[i];
            if (i != j && dt >= 1 && dt <= dt_max) g.edges.push_back({EdgeKind::link, i, j, 0.0, 1.0, {}, dt});
        }
    return g;
}

inline FlowGraph build_graph(const std::vector<Tracklet>& tracklets, int dt_max, double beta) {
    std::vector<const Tracklet*> ptrs;
    for (const auto& t : tracklets) ptrs.push_back(&t);
    return build_graph(ptrs, dt_max, beta);
}

/// Overwrites all edge costs; `costs` follows the flattened edge order.
inline void set_costs(FlowGraph& g, const std::vector<double>& costs) {
    if (costs.size() != g.edges.size()) throw ConfigError("cost vector does not match graph edges");
    for (std::size_t k = 0; k < costs.size(); ++k) g.edges[k].cost = costs[k];
}

struct FlowSolution {
    std::vector<int> x;
    double objective = 0.0;
    /// Chains of local node indices in temporal order.
    std::vector<std::vector<int>> chains;
};

/// True iff x satisfies det = init + inflow = term + outflow at every node.
inline bool conserves_flow(const FlowGraph& g, const std::vector<int>& x) {
    if (x.size() != g.edges.size()) return false;
    const std::size_t n = g.node_count();
    std::vector<int> in(n, 0), out(n, 0);
    for (std::size_t k = g.first_link(); k < g.edges.size(); ++k) {
        out[g.edges[k].from] += x[k];
        in[g.edges[k].to] += x[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int det = x[g.det_edge(i)];
        if (det != x[g.init_edge(i)] + in[i] || det != x[g.term_edge(i)] + out[i]) return false;
    }
    for (int v : x)
        if (v != 0 && v != 1) return false;
    return true;
}

inline double flow_objective(const FlowGraph& g, const std::vector<int>& x) {
    double total = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k]) total += g.edges[k].cost;
    return total;
}

/// Reads node chains off a feasible integral x.
inline std::vector<std::vector<int>> chains_from_flow(const FlowGraph& g, const std::vector<int>& x) {
    if (!conserves_flow(g, x)) throw InternalError("flow vector violates conservation");
    const std::size_t n = g.node_count();
    std::vector<int> next(n, -1);
    for (std::size_t k = g.first_link(); k < g.edges.size(); ++k)
        if (x[k]) next[g.edges[k].from] = g.edges[k].to;
    std::vector<std::vector<int>> chains;
    for (std::size_t i = 0; i < n; ++i) {
        if (!x[g.init_edge(i)]) continue;
        std::vector<int> chain;
        for (int v = static_cast<int>(i); v != -1; v = next[v]) chain.push_back(v);
        chains.push_back(std::move(chain));
    }
    std::sort(chains.begin(), chains.end(),
              [&](const auto& a, const auto& b) { return g.first_frame[a[0]] != g.first_frame[b[0]]
                                                             ? g.first_frame[a[0]] < g.first_frame[b[0]]
                                                             : a[0] < b[0]; });
    return chains;
}

namespace flow_detail {

struct Arc {
    int to;
    int rev;
    int cap;
    double cost;
    int var;  // flattened variable index, -1 for reverse arcs
};

}  // namespace flow_detail

/// Exact minimum-cost flow with free flow value.
///
/// Each tracklet is split into in/out vertices joined by its det edge; source
/// and sink connect through init/term edges; every arc has unit capacity.
/// Because links only point forward in time, the network is a DAG, so initial
/// potentials are shortest distances computed in topological order. Successive
/// shortest paths (Dijkstra on reduced costs) then augment one unit at a time
/// while the cheapest source-to-sink path has negative cost.
inline FlowSolution solve_min_cost(const FlowGraph& g) {
    using flow_detail::Arc;
    const int n = static_cast<int>(g.node_count());
    FlowSolution sol;
    sol.x.assign(g.edges.size(), 0);
    if (n == 0) return sol;

    const int source = 2 * n, sink = 2 * n + 1, vcount = 2 * n + 2;
    auto in_v = [](int i) { return 2 * i; };
    auto out_v = [](int i) { return 2 * i + 1; };
    std::vector<std::vector<Arc>> adj(vcount);
    auto add_arc = [&](int u, int v, double cost, int var) {
        adj[u].push_back({v, static_cast<int>(adj[v].size()), 1, cost, var});
        adj[v].push_back({u, static_cast<int>(adj[u].size()) - 1, 0, -cost, -1});
    };
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const FlowEdge& e = g.edges[k];
        const int var = static_cast<int>(k);
        switch (e.kind) {
            case EdgeKind::det: add_arc(in_v(e.from), out_v(e.from), e.cost, var); break;
            case EdgeKind::init: add_arc(source, in_v(e.from), e.cost, var); break;
            case EdgeKind::term: add_arc(out_v(e.from), sink, e.cost, var); break;
            case EdgeKind::link:
                if (g.first_frame[e.to] <= g.last_frame[e.from])
                    throw PreconditionError("link edge must point forward in time");
                add_arc(out_v(e.from), in_v(e.to), e.cost, var);
                break;
        }
    }

    // Topological order: source, then tracklets by head frame (in before out), then sink.
    std::vector<int> order_nodes(n);
    for (int i = 0; i < n; ++i) order_nodes[i] = i;
    std::stable_sort(order_nodes.begin(), order_nodes.end(),
                     [&](int a, int b) { return g.first_frame[a] < g.first_frame[b]; });
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> pot(vcount, inf);
    pot[source] = 0.0;
    auto relax_from = [&](int u) {
        if (pot[u] == inf) return;
        for (const Arc& a : adj[u])
            if (a.cap > 0 && pot[u] + a.cost < pot[a.to]) pot[a.to] = pot[u] + a.cost;
    };
    relax_from(source);
    for (int i : order_nodes) {
        relax_from(in_v(i));
        relax_from(out_v(i));
    }

    std::vector<double> dist(vcount);
    std::vector<int> prev_v(vcount), prev_a(vcount);
    std::vector<char> done(vcount);
    using Item = std::pair<double, int>;
    while (true) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(done.begin(), done.end(), 0);
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[source] = 0.0;
        heap.push({0.0, source});
        while (!heap.empty()) {
            auto [d, u] = heap.top();
            heap.pop();
            if (done[u]) continue;
            done[u] = 1;
            for (int k = 0; k < static_cast<int>(adj[u].size()); ++k) {
                const Arc& a = adj[u][k];
                if (a.cap == 0) continue;
                // Reduced costs are nonnegative up to rounding.
                const double rc = std::max(0.0, a.cost + pot[u] - pot[a.to]);
                if (d + rc < dist[a.to]) {
                    dist[a.to] = d + rc;
                    prev_v[a.to] = u;
                    prev_a[a.to] = k;
                    heap.push({dist[a.to], a.to});
                }
            }
        }
        if (!done[sink]) break;
        const double path_cost = dist[sink] + pot[sink] - pot[source];
        if (path_cost >= 0.0) break;
        double dmax = 0.0;
        for (int v = 0; v < vcount; ++v)
            if (done[v]) dmax = std::max(dmax, dist[v]);
        for (int v = 0; v < vcount; ++v) pot[v] += done[v] ? dist[v] : dmax;
        for (int v = sink; v != source; v = prev_v[v]) {
            Arc& a = adj[prev_v[v]][prev_a[v]];
            a.cap -= 1;
            adj[v][a.rev].cap += 1;
        }
    }

    for (int u = 0; u < vcount; ++u)
        for (const Arc& a : adj[u])
            if (a.var >= 0 && a.cap == 0) sol.x[a.var] = 1;
    sol.objective = flow_objective(g, sol.x);
    sol.chains = chains_from_flow(g, sol.x);
    return sol;
}

/// Concatenates member detections of each chain into a trajectory. `tracklets`
/// is indexed by tracklet id. Identities are 1.. in chain order.
inline std::vector<Trajectory> decode_trajectories(const FlowSolution& sol, const FlowGraph& g,
                                                   const std::vector<Tracklet>& tracklets) {
    std::vector<Trajectory> out;
    for (const auto& chain : chains_from_flow(g, sol.x)) {
        Trajectory t{static_cast<int>(out.size()) + 1, {}};
        for (int node : chain)
            for (const auto& d : tracklets.at(g.nodes[node]).detections) t.entries.push_back({d.frame, d.box, false});
        out.push_back(std::move(t));
    }
    return out;
}

/// Debug dump: one line per node and per edge.
///   node <local> <tracklet id> <first frame> <last frame>
///   edge <index> <kind> <from> <to> <cost> <weight> <x|-> <gt|->
inline void dump_graph(std::ostream& os, const FlowGraph& g, const std::vector<int>* x = nullptr) {
    os << "graph nodes " << g.node_count() << " edges " << g.edges.size() << '\n';
    for (std::size_t i = 0; i < g.node_count(); ++i)
        os << "node " << i << ' ' << g.nodes[i] << ' ' << g.first_frame[i] << ' ' << g.last_frame[i] << '\n';
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const FlowEdge& e = g.edges[k];
        os << "edge " << k << ' ' << to_string(e.kind) << ' ' << e.from << ' ' << e.to << ' '
           << exact_double(e.cost) << ' ' << exact_double(e.weight) << ' '
           << (x ? std::to_string((*x)[k]) : std::string("-")) << ' '
           << (e.gt ? std::to_string(*e.gt) : std::string("-")) << '\n';
    }
}

}  // namespace tflow
