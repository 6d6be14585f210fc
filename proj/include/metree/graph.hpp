#pragma once

// Metric graphs: vertices glued to the endpoints of edges [0, l_e], with
// loops and parallel edges allowed. Every edge carries its canonical
// orientation (increasing coordinate); the endpoint at coordinate 0 is the
// tail, the endpoint at l_e the head.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "errors.hpp"

namespace metree {

using VertexId = std::size_t;
using EdgeId = std::size_t;

enum class Side { tail, head };

/// One end of an edge attached to a vertex. A loop contributes two germs
/// to its vertex, one per side.
struct Germ {
    VertexId vertex;
    EdgeId edge;
    Side side;

    friend bool operator==(const Germ&, const Germ&) = default;
};

struct MetricEdge {
    std::string name;
    double length;
    VertexId tail;
    VertexId head;

    bool is_loop() const noexcept { return tail == head; }
    VertexId endpoint(Side s) const noexcept { return s == Side::tail ? tail : head; }
    double coordinate(Side s) const noexcept { return s == Side::tail ? 0.0 : length; }
};

/// A point of the metric graph given by an edge and a coordinate on it.
struct Point {
    EdgeId edge;
    double x;
};

/// Plain description used to build a graph; vertices and edge endpoints
/// are referenced by name.
struct GraphSpec {
    struct Edge {
        std::string name;
        double length;
        std::string tail;
        std::string head;
    };
    std::vector<std::string> vertices;
    std::vector<Edge> edges;
};

struct CutSet;

class MetricGraph {
public:
    MetricGraph() = default;

    static MetricGraph build(const GraphSpec& spec);

    std::size_t num_vertices() const noexcept { return vertex_names_.size(); }
    std::size_t num_edges() const noexcept { return edges_.size(); }

    const MetricEdge& edge(EdgeId e) const { return edges_.at(e); }
    const std::vector<MetricEdge>& edges() const noexcept { return edges_; }
    const std::string& vertex_name(VertexId v) const { return vertex_names_.at(v); }
    const std::vector<std::string>& vertex_names() const noexcept { return vertex_names_; }

    std::optional<VertexId> find_vertex(const std::string& name) const {
        auto it = std::find(vertex_names_.begin(), vertex_names_.end(), name);
        if (it == vertex_names_.end()) return std::nullopt;
        return static_cast<VertexId>(it - vertex_names_.begin());
    }

    std::optional<EdgeId> find_edge(const std::string& name) const {
        for (EdgeId e = 0; e < edges_.size(); ++e)
            if (edges_[e].name == name) return e;
        return std::nullopt;
    }

    /// Germs at v ordered by (edge, side).
    const std::vector<Germ>& germs(VertexId v) const { return germs_.at(v); }
    /// A+(v): edges whose tail is v.
    const std::vector<EdgeId>& exiting(VertexId v) const { return exiting_.at(v); }
    /// A-(v): edges whose head is v.
    const std::vector<EdgeId>& entering(VertexId v) const { return entering_.at(v); }

    Germ germ(EdgeId e, Side s) const { return {edges_.at(e).endpoint(s), e, s}; }

    /// |E| - |V| + 1, the number of cuts turning the graph into a tree.
    std::size_t cut_space_dimension() const noexcept { return edges_.size() + 1 - vertex_names_.size(); }

    bool is_tree() const noexcept { return edges_.size() + 1 == vertex_names_.size(); }

private:
    std::vector<std::string> vertex_names_;
    std::vector<MetricEdge> edges_;
    std::vector<std::vector<Germ>> germs_;
    std::vector<std::vector<EdgeId>> exiting_, entering_;

    friend MetricGraph cut(const MetricGraph&, const CutSet&);
    void index();
};

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
        return i;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[a] = b;
        return true;
    }

private:
    std::vector<std::size_t> parent_;
};

inline bool connected(std::size_t n, const std::vector<MetricEdge>& edges) {
    if (n == 0) return false;
    DisjointSets sets(n);
    std::size_t components = n;
    for (const auto& e : edges)
        if (sets.unite(e.tail, e.head)) --components;
    return components == 1;
}

}  // namespace detail

inline void MetricGraph::index() {
    const std::size_t n = vertex_names_.size();
    germs_.assign(n, {});
    exiting_.assign(n, {});
    entering_.assign(n, {});
    for (EdgeId e = 0; e < edges_.size(); ++e) {
        const auto& me = edges_[e];
        germs_[me.tail].push_back({me.tail, e, Side::tail});
        germs_[me.head].push_back({me.head, e, Side::head});
        exiting_[me.tail].push_back(e);
        entering_[me.head].push_back(e);
    }
}

inline MetricGraph MetricGraph::build(const GraphSpec& spec) {
    MetricGraph g;
    if (spec.vertices.empty()) throw GraphError("graph has no vertices");
    for (const auto& name : spec.vertices) {
        if (g.find_vertex(name)) throw GraphError(fmt::format("duplicate vertex '{}'", name));
        g.vertex_names_.push_back(name);
    }
    for (const auto& e : spec.edges) {
        if (g.find_edge(e.name)) throw GraphError(fmt::format("duplicate edge '{}'", e.name));
        if (!(e.length > 0.0) || !std::isfinite(e.length))
            throw GraphError(fmt::format("edge '{}' has nonpositive or non-finite length {}", e.name, e.length));
        auto tail = g.find_vertex(e.tail);
        auto head = g.find_vertex(e.head);
        if (!tail) throw GraphError(fmt::format("edge '{}' references unknown tail vertex '{}'", e.name, e.tail));
        if (!head) throw GraphError(fmt::format("edge '{}' references unknown head vertex '{}'", e.name, e.head));
        g.edges_.push_back({e.name, e.length, *tail, *head});
    }
    if (!detail::connected(g.vertex_names_.size(), g.edges_)) throw GraphError("graph is not connected");
    g.index();
    return g;
}

/// Spanning tree of the underlying multigraph: tree edges and the
/// complementary cut edges, both sorted.
struct SpanningTree {
    std::vector<EdgeId> tree;
    std::vector<EdgeId> cut;

    bool contains(EdgeId e) const { return std::binary_search(tree.begin(), tree.end(), e); }
};

/// All spanning trees, by recursive inclusion/exclusion of edges in index
/// order (contract an edge or delete it). Loops never enter a tree and
/// parallel edges give distinct trees.
inline std::vector<SpanningTree> spanning_trees(const MetricGraph& g) {
    const std::size_t n = g.num_vertices();
    const std::size_t m = g.num_edges();
    std::vector<SpanningTree> out;
    std::vector<EdgeId> chosen;

    // Union-find without path compression so that unions can be undone.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t v) {
        while (parent[v] != v) v = parent[v];
        return v;
    };

    // Connectivity of the current contraction using edges chosen or still
    // undecided; an edge can be deleted only if this survives.
    auto still_spannable = [&](EdgeId from) {
        detail::DisjointSets sets(n);
        std::size_t comps = n;
        for (VertexId v = 0; v < n; ++v)
            if (sets.unite(v, root(v))) --comps;
        for (EdgeId e = from; e < m; ++e)
            if (sets.unite(g.edge(e).tail, g.edge(e).head)) --comps;
        return comps == 1;
    };

    auto recurse = [&](auto&& self, EdgeId e) -> void {
        if (chosen.size() + 1 == n) {
            SpanningTree t;
            t.tree = chosen;
            for (EdgeId f = 0; f < m; ++f)
                if (!std::binary_search(chosen.begin(), chosen.end(), f)) t.cut.push_back(f);
            out.push_back(std::move(t));
            return;
        }
        if (e == m) return;
        const auto& me = g.edge(e);
        const std::size_t a = root(me.tail), b = root(me.head);
        if (a != b) {
            parent[a] = b;
            chosen.push_back(e);
            self(self, e + 1);
            chosen.pop_back();
            parent[a] = a;
        }
        if (still_spannable(e + 1)) self(self, e + 1);
    };
    recurse(recurse, 0);
    return out;
}

/// One cut position per edge, strictly inside the edge.
struct Cut {
    EdgeId edge;
    double position;
};

struct CutSet {
    std::vector<Cut> cuts;

    std::optional<double> position(EdgeId e) const {
        for (const auto& c : cuts)
            if (c.edge == e) return c.position;
        return std::nullopt;
    }
};

namespace detail {

inline void validate_cuts(const MetricGraph& g, const CutSet& cuts) {
    std::vector<bool> seen(g.num_edges(), false);
    for (const auto& c : cuts.cuts) {
        if (c.edge >= g.num_edges()) throw GraphError(fmt::format("cut on unknown edge {}", c.edge));
        const auto& e = g.edge(c.edge);
        if (!(c.position > 0.0 && c.position < e.length))
            throw GraphError(
                fmt::format("cut at {} is not strictly inside edge '{}' of length {}", c.position, e.name, e.length));
        if (seen[c.edge]) throw GraphError(fmt::format("two cuts on edge '{}'", e.name));
        seen[c.edge] = true;
    }
}

}  // namespace detail

/// Cuts the graph at the given points. Each cut edge e is replaced by
/// e/0 = (0, y) glued to the old tail and a new leaf, and e/1 = (0, l - y)
/// glued to a second new leaf and the old head. The result must be a tree.
inline MetricGraph cut(const MetricGraph& g, const CutSet& cuts) {
    detail::validate_cuts(g, cuts);
    MetricGraph t;
    t.vertex_names_ = g.vertex_names_;
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& me = g.edge(e);
        auto y = cuts.position(e);
        if (!y) {
            t.edges_.push_back(me);
            continue;
        }
        const VertexId leaf0 = t.vertex_names_.size();
        t.vertex_names_.push_back(me.name + "@" + fmt::format("{}", *y) + "-");
        const VertexId leaf1 = t.vertex_names_.size();
        t.vertex_names_.push_back(me.name + "@" + fmt::format("{}", *y) + "+");
        t.edges_.push_back({me.name + "/0", *y, me.tail, leaf0});
        t.edges_.push_back({me.name + "/1", me.length - *y, leaf1, me.head});
    }
    if (!t.is_tree() || !detail::connected(t.vertex_names_.size(), t.edges_))
        throw GraphError("the cut edges are not the complement of a spanning tree");
    t.index();
    return t;
}

/// Orientation of a set of edges toward a set of anchor vertices: every
/// non-anchor vertex reachable through `edges` gets the germ leading one
/// step closer to its anchor; tree edges get direction +1 (canonical) or -1.
struct Routing {
    std::vector<std::optional<Germ>> exit;  // per vertex; unset for anchors / unreached
    std::vector<int> direction;             // per edge; 0 if not part of `edges`
    std::vector<bool> reached;
};

inline Routing route_toward(const MetricGraph& g, const std::vector<EdgeId>& edges,
                            const std::vector<VertexId>& anchors) {
    Routing r;
    r.exit.assign(g.num_vertices(), std::nullopt);
    r.direction.assign(g.num_edges(), 0);
    r.reached.assign(g.num_vertices(), false);

    std::vector<std::vector<EdgeId>> adj(g.num_vertices());
    for (EdgeId e : edges) {
        const auto& me = g.edge(e);
        if (me.is_loop()) continue;
        adj[me.tail].push_back(e);
        adj[me.head].push_back(e);
    }
    std::queue<VertexId> q;
    for (VertexId a : anchors) {
        if (!r.reached[a]) {
            r.reached[a] = true;
            q.push(a);
        }
    }
    while (!q.empty()) {
        const VertexId v = q.front();
        q.pop();
        for (EdgeId e : adj[v]) {
            const auto& me = g.edge(e);
            const VertexId w = me.tail == v ? me.head : me.tail;
            if (r.reached[w]) continue;
            r.reached[w] = true;
            // w flows toward v along e.
            if (w == me.tail) {
                r.exit[w] = Germ{w, e, Side::tail};
                r.direction[e] = +1;
            } else {
                r.exit[w] = Germ{w, e, Side::head};
                r.direction[e] = -1;
            }
            q.push(w);
        }
    }
    return r;
}

/// Oriented piece of an edge; flow goes from coordinate `from` to `to`.
struct Segment {
    double from;
    double to;

    double lo() const { return std::min(from, to); }
    double hi() const { return std::max(from, to); }
};

/// Metric arborescence oriented toward a root point. Each edge is
/// partitioned into oriented segments; every vertex has exactly one
/// exiting germ.
class Arborescence {
public:
    Point root;
    SpanningTree tree;
    CutSet cuts;
    std::vector<std::vector<Segment>> segments;  // per edge, sorted by position
    std::vector<Germ> exit;                      // per vertex

    /// +1 if the germ exits its vertex in this arborescence, -1 if it enters.
    int sign(const Germ& germ) const {
        const auto& segs = segments.at(germ.edge);
        if (germ.side == Side::tail) return segs.front().from == 0.0 ? +1 : -1;
        return segs.back().from == edge_length_.at(germ.edge) ? +1 : -1;
    }

    /// Follows orientations from `start` and reports whether the root is
    /// reached. `visited` (optional) receives the sequence of edges walked.
    bool reaches_root(const MetricGraph& g, Point start, std::vector<EdgeId>* visited = nullptr) const {
        EdgeId e = start.edge;
        double z = start.x;
        const std::size_t limit = 2 * g.num_edges() + 4;
        for (std::size_t step = 0; step < limit; ++step) {
            if (visited) visited->push_back(e);
            const Segment* seg = nullptr;
            for (const auto& s : segments.at(e))
                if (z >= s.lo() && z <= s.hi()) {
                    // At a shared endpoint prefer the segment that flows away from z.
                    if (!seg || s.from == z) seg = &s;
                }
            if (!seg) return false;
            if (e == root.edge && seg->to == root.x) return true;
            if (seg->to != 0.0 && seg->to != g.edge(e).length) return false;  // flows into a cut: impossible
            const Side side = seg->to == 0.0 ? Side::tail : Side::head;
            const VertexId v = g.edge(e).endpoint(side);
            const Germ next = exit.at(v);
            e = next.edge;
            z = g.edge(e).coordinate(next.side);
        }
        return false;
    }

private:
    std::vector<double> edge_length_;
    friend Arborescence arborescence(const MetricGraph&, const SpanningTree&, const CutSet&, Point);
};

/// Builds the arborescence obtained by cutting at `cuts` (one per
/// complement edge of `tree`) and orienting everything toward `root`.
/// The root must lie inside an edge and differ from any cut point.
inline Arborescence arborescence(const MetricGraph& g, const SpanningTree& tree, const CutSet& cuts, Point root) {
    detail::validate_cuts(g, cuts);
    if (cuts.cuts.size() != tree.cut.size())
        throw GraphError("cut set does not match the complement of the spanning tree");
    for (EdgeId c : tree.cut)
        if (!cuts.position(c)) throw GraphError(fmt::format("edge '{}' outside the tree has no cut", g.edge(c).name));
    if (root.edge >= g.num_edges()) throw GraphError("root on unknown edge");
    const auto& re = g.edge(root.edge);
    if (!(root.x > 0.0 && root.x < re.length)) throw GraphError("root must lie strictly inside its edge");
    const auto root_cut = cuts.position(root.edge);
    if (root_cut && *root_cut == root.x) throw GraphError("root coincides with a cut point");

    Arborescence a;
    a.root = root;
    a.tree = tree;
    a.cuts = cuts;
    a.segments.assign(g.num_edges(), {});
    a.edge_length_.resize(g.num_edges());
    for (EdgeId e = 0; e < g.num_edges(); ++e) a.edge_length_[e] = g.edge(e).length;

    std::vector<VertexId> anchors;
    std::vector<Germ> anchor_exit;
    if (!root_cut) {
        a.segments[root.edge] = {{0.0, root.x}, {re.length, root.x}};
        anchors = {re.tail, re.head};
        anchor_exit = {{re.tail, root.edge, Side::tail}, {re.head, root.edge, Side::head}};
    } else if (*root_cut < root.x) {
        a.segments[root.edge] = {{*root_cut, 0.0}, {*root_cut, root.x}, {re.length, root.x}};
        anchors = {re.head};
        anchor_exit = {{re.head, root.edge, Side::head}};
    } else {
        a.segments[root.edge] = {{0.0, root.x}, {*root_cut, root.x}, {*root_cut, re.length}};
        anchors = {re.tail};
        anchor_exit = {{re.tail, root.edge, Side::tail}};
    }

    const Routing routing = route_toward(g, tree.tree, anchors);
    a.exit.resize(g.num_vertices());
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        if (!routing.reached[v]) throw GraphError("spanning tree does not reach every vertex");
        if (routing.exit[v]) a.exit[v] = *routing.exit[v];
    }
    for (std::size_t i = 0; i < anchors.size(); ++i) a.exit[anchors[i]] = anchor_exit[i];

    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        if (e == root.edge) continue;
        const double len = g.edge(e).length;
        if (auto y = cuts.position(e)) {
            a.segments[e] = {{*y, 0.0}, {*y, len}};
        } else if (routing.direction[e] > 0) {
            a.segments[e] = {{0.0, len}};
        } else {
            a.segments[e] = {{len, 0.0}};
        }
    }

    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        int exits = 0;
        for (const auto& germ : g.germs(v)) exits += a.sign(germ) > 0 ? 1 : 0;
        if (exits != 1)
            throw GraphError(fmt::format("internal: vertex '{}' has {} exiting germs", g.vertex_name(v), exits));
    }
    return a;
}

/// Connected spanning subgraph with a single cycle through a given edge,
/// with the cycle oriented one way and the rest oriented toward the cycle.
/// Edges outside the subgraph are cut (positions left to the caller); both
/// halves of a cut edge enter their endpoint vertices.
struct UnicyclicSubgraph {
    EdgeId through;
    std::vector<EdgeId> edges;   // sorted
    std::vector<EdgeId> cut;     // sorted complement
    std::vector<EdgeId> cycle;   // cycle edges, `through` first
    int orientation;             // +1: `through` traversed canonically, -1 reversed
    std::vector<int> direction;  // per graph edge: +1, -1, or 0 when cut
    std::vector<Germ> exit;      // per vertex
};

/// All unicyclic subgraphs whose cycle contains e, each with both cycle
/// orientations (consecutive entries form the pair L, L-bar). Returns an
/// empty list when e is a bridge.
inline std::vector<UnicyclicSubgraph> unicyclic_subgraphs(const MetricGraph& g, EdgeId e) {
    std::vector<UnicyclicSubgraph> out;
    const auto& me = g.edge(e);
    for (const auto& t : spanning_trees(g)) {
        if (t.contains(e)) continue;

        // Tree path from head(e) back to tail(e).
        std::vector<EdgeId> path;
        if (!me.is_loop()) {
            const Routing to_tail = route_toward(g, t.tree, {me.tail});
            VertexId v = me.head;
            while (v != me.tail) {
                const Germ step = *to_tail.exit[v];
                path.push_back(step.edge);
                v = g.edge(step.edge).endpoint(step.side == Side::tail ? Side::head : Side::tail);
            }
        }

        for (int orientation : {+1, -1}) {
            UnicyclicSubgraph L;
            L.through = e;
            L.edges = t.tree;
            L.edges.push_back(e);
            std::sort(L.edges.begin(), L.edges.end());
            L.cut = t.cut;
            L.cut.erase(std::find(L.cut.begin(), L.cut.end(), e));
            L.cycle.push_back(e);
            L.cycle.insert(L.cycle.end(), path.begin(), path.end());
            L.orientation = orientation;
            L.direction.assign(g.num_edges(), 0);
            L.exit.resize(g.num_vertices());

            std::vector<VertexId> cycle_vertices{me.tail};
            std::vector<bool> on_cycle(g.num_vertices(), false);
            on_cycle[me.tail] = true;
            L.direction[e] = orientation;
            if (orientation > 0) L.exit[me.tail] = {me.tail, e, Side::tail};
            else L.exit[me.head] = {me.head, e, Side::head};

            // Walk the path head -> tail; for orientation +1 flow follows the walk.
            VertexId v = me.head;
            for (EdgeId f : path) {
                const auto& mf = g.edge(f);
                const VertexId w = mf.tail == v ? mf.head : mf.tail;
                on_cycle[v] = true;
                cycle_vertices.push_back(v);
                if (orientation > 0) {
                    L.exit[v] = {v, f, mf.tail == v ? Side::tail : Side::head};
                    L.direction[f] = mf.tail == v ? +1 : -1;
                } else {
                    L.exit[w] = {w, f, mf.tail == w ? Side::tail : Side::head};
                    L.direction[f] = mf.tail == w ? +1 : -1;
                }
                v = w;
            }

            std::vector<EdgeId> off_cycle;
            for (EdgeId f : t.tree)
                if (std::find(path.begin(), path.end(), f) == path.end()) off_cycle.push_back(f);
            const Routing rest = route_toward(g, off_cycle, cycle_vertices);
            for (VertexId u = 0; u < g.num_vertices(); ++u)
                if (!on_cycle[u]) L.exit[u] = *rest.exit[u];
            for (EdgeId f : off_cycle) L.direction[f] = rest.direction[f];
            out.push_back(std::move(L));
        }
    }
    return out;
}

}  // namespace metree
