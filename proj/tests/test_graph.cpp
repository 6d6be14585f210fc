#include <cmath>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "metree/graph.hpp"

using namespace metree;

namespace {

MetricGraph theta() {
    return MetricGraph::build({{"u", "v"}, {{"a", 1.0, "u", "v"}, {"b", 1.5, "u", "v"}, {"c", 0.7, "v", "u"}}});
}

MetricGraph k4_with_extras() {
    GraphSpec s;
    s.vertices = {"0", "1", "2", "3"};
    s.edges = {{"01", 1.0, "0", "1"}, {"02", 1.0, "0", "2"}, {"03", 1.0, "0", "3"}, {"12", 1.0, "1", "2"},
               {"13", 1.0, "1", "3"}, {"23", 1.0, "2", "3"}, {"12b", 0.5, "2", "1"}, {"loop", 2.0, "3", "3"}};
    return MetricGraph::build(s);
}

// Kirchhoff: the number of spanning trees is any cofactor of the Laplacian.
double kirchhoff_count(const MetricGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.num_vertices());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : g.edges()) {
        if (e.is_loop()) continue;
        const auto t = static_cast<Eigen::Index>(e.tail), h = static_cast<Eigen::Index>(e.head);
        lap(t, t) += 1;
        lap(h, h) += 1;
        lap(t, h) -= 1;
        lap(h, t) -= 1;
    }
    if (n == 1) return 1.0;
    return lap.bottomRightCorner(n - 1, n - 1).determinant();
}

}  // namespace

TEST(MetricGraph, BuildValidates) {
    EXPECT_THROW(MetricGraph::build({{"a", "a"}, {}}), GraphError);
    EXPECT_THROW(MetricGraph::build({{"a", "b"}, {{"e", 1.0, "a", "b"}, {"e", 1.0, "a", "b"}}}), GraphError);
    EXPECT_THROW(MetricGraph::build({{"a", "b"}, {{"e", 0.0, "a", "b"}}}), GraphError);
    EXPECT_THROW(MetricGraph::build({{"a", "b"}, {{"e", 1.0, "a", "c"}}}), GraphError);
    EXPECT_THROW(MetricGraph::build({{"a", "b", "c"}, {{"e", 1.0, "a", "b"}}}), GraphError);
    EXPECT_NO_THROW(MetricGraph::build({{"o"}, {{"ring", 1.0, "o", "o"}}}));
}

TEST(MetricGraph, GermsAndIncidence) {
    const auto ring = MetricGraph::build({{"o"}, {{"ring", 1.0, "o", "o"}}});
    ASSERT_EQ(ring.germs(0).size(), 2u);
    EXPECT_EQ(ring.germs(0)[0].side, Side::tail);
    EXPECT_EQ(ring.germs(0)[1].side, Side::head);
    EXPECT_EQ(ring.cut_space_dimension(), 1u);

    const auto g = theta();
    EXPECT_EQ(g.cut_space_dimension(), 2u);
    EXPECT_EQ(g.exiting(0), (std::vector<EdgeId>{0, 1}));
    EXPECT_EQ(g.entering(0), (std::vector<EdgeId>{2}));
    EXPECT_EQ(g.germs(1).size(), 3u);
    EXPECT_EQ(g.find_edge("c"), EdgeId{2});
    EXPECT_FALSE(g.find_vertex("w").has_value());
}

TEST(SpanningTrees, CountMatchesKirchhoff) {
    for (const auto& g : {theta(), k4_with_extras(), MetricGraph::build({{"o"}, {{"r", 1.0, "o", "o"}}})}) {
        const auto trees = spanning_trees(g);
        EXPECT_NEAR(static_cast<double>(trees.size()), kirchhoff_count(g), 1e-9);
        std::set<std::vector<EdgeId>> distinct;
        for (const auto& t : trees) {
            EXPECT_EQ(t.tree.size() + 1, g.num_vertices());
            EXPECT_EQ(t.cut.size(), g.cut_space_dimension());
            distinct.insert(t.tree);
        }
        EXPECT_EQ(distinct.size(), trees.size());
    }
}

TEST(Cut, ProducesTreeAndRejectsBadCuts) {
    const auto g = theta();
    const auto t = cut(g, {{{1, 0.5}, {2, 0.2}}});
    EXPECT_TRUE(t.is_tree());
    EXPECT_EQ(t.num_vertices(), 6u);
    EXPECT_TRUE(t.find_edge("b/0").has_value());
    EXPECT_DOUBLE_EQ(t.edge(*t.find_edge("b/1")).length, 1.0);

    EXPECT_THROW(cut(g, {{{1, 0.0}, {2, 0.2}}}), GraphError);   // at an endpoint
    EXPECT_THROW(cut(g, {{{1, 1.5}, {2, 0.2}}}), GraphError);   // at an endpoint
    EXPECT_THROW(cut(g, {{{1, 0.5}, {1, 0.7}}}), GraphError);   // twice on one edge
    EXPECT_THROW(cut(g, {{{1, 0.5}}}), GraphError);             // still has a cycle
    EXPECT_THROW(cut(g, {{{0, 0.5}, {1, 0.5}, {2, 0.2}}}), GraphError);  // disconnects
}

TEST(Arborescence, EveryPointFlowsToTheRoot) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.01, 0.99);
    for (const auto& g : {theta(), k4_with_extras()}) {
        for (const auto& t : spanning_trees(g)) {
            for (int trial = 0; trial < 3; ++trial) {
                CutSet cuts;
                for (EdgeId c : t.cut) cuts.cuts.push_back({c, unit(rng) * g.edge(c).length});
                const EdgeId re = std::uniform_int_distribution<EdgeId>(0, g.num_edges() - 1)(rng);
                double rx = unit(rng) * g.edge(re).length;
                if (auto y = cuts.position(re); y && std::abs(*y - rx) < 1e-6) rx = 0.5 * (*y + g.edge(re).length);
                const auto tau = arborescence(g, t, cuts, {re, rx});
                for (VertexId v = 0; v < g.num_vertices(); ++v) EXPECT_EQ(tau.sign(tau.exit[v]), +1);
                for (int p = 0; p < 256; ++p) {
                    const EdgeId e = std::uniform_int_distribution<EdgeId>(0, g.num_edges() - 1)(rng);
                    const double x = unit(rng) * g.edge(e).length;
                    if (auto y = cuts.position(e); y && std::abs(*y - x) < 1e-9) continue;
                    EXPECT_TRUE(tau.reaches_root(g, {e, x})) << "edge " << e << " x " << x;
                }
            }
        }
    }
}

TEST(Arborescence, RejectsRootAtCutOrVertex) {
    const auto g = theta();
    const auto t = spanning_trees(g).front();
    CutSet cuts;
    for (EdgeId c : t.cut) cuts.cuts.push_back({c, 0.3});
    EXPECT_THROW(arborescence(g, t, cuts, {t.cut.front(), 0.3}), GraphError);
    EXPECT_THROW(arborescence(g, t, cuts, {0, 0.0}), GraphError);
    EXPECT_THROW(arborescence(g, t, {}, {0, 0.5}), GraphError);
}

TEST(Unicyclic, PairsHaveOppositeOrientation) {
    const auto g = k4_with_extras();
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto list = unicyclic_subgraphs(g, e);
        ASSERT_EQ(list.size() % 2, 0u);
        for (std::size_t i = 0; i < list.size(); i += 2) {
            const auto& l = list[i];
            const auto& lbar = list[i + 1];
            EXPECT_EQ(l.edges, lbar.edges);
            EXPECT_EQ(l.orientation, -lbar.orientation);
            EXPECT_EQ(l.cycle.front(), e);
            EXPECT_EQ(l.cut.size() + 1, g.cut_space_dimension());
            for (EdgeId f : l.cycle) EXPECT_EQ(l.direction[f], -lbar.direction[f]);
        }
    }
    // A bridge lies on no cycle.
    const auto path = MetricGraph::build({{"a", "b"}, {{"e", 1.0, "a", "b"}}});
    EXPECT_TRUE(unicyclic_subgraphs(path, 0).empty());
}

TEST(Routing, OrientsTowardAnchors) {
    const auto g = k4_with_extras();
    const auto t = spanning_trees(g).back();
    const auto r = route_toward(g, t.tree, {2});
    EXPECT_FALSE(r.exit[2].has_value());
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        EXPECT_TRUE(r.reached[v]);
        VertexId w = v;
        for (int step = 0; step < 4 && w != 2; ++step) {
            const Germ gm = *r.exit[w];
            w = g.edge(gm.edge).endpoint(gm.side == Side::tail ? Side::head : Side::tail);
        }
        EXPECT_EQ(w, 2u);
    }
}
