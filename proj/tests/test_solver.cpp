#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "metree/scaling.hpp"
#include "metree/solver.hpp"
#include "metree/treemeasure.hpp"

using namespace metree;

namespace {

Expression ex(const char* t) { return Expression::parse(t); }

ModelPtr interval(const char* b, const char* sigma = "1") {
    auto g = MetricGraph::build({{"l", "r"}, {{"I", 1.0, "l", "r"}}});
    return make_model(g, {{ex(b), ex(sigma)}}, VertexParams::uniform(g));
}

ModelPtr theta(bool reversible) {
    auto g = MetricGraph::build({{"u", "v"}, {{"a", 1.0, "u", "v"}, {"b", 2.0, "u", "v"}, {"c", 1.0, "u", "v"}}});
    auto prm = VertexParams::uniform(g);
    prm.alpha = {0.5, 0.25};
    const char* third = reversible ? "2*x" : "3*x";
    return make_model(std::move(g), {{ex("1"), ex("1")}, {ex("0.5"), ex("1")}, {ex(third), ex("1")}}, std::move(prm));
}

double sup_rel(const Model& m, const Measure& a, const Measure& b) {
    double d = 0.0;
    for (EdgeId e = 0; e < m.graph.num_edges(); ++e)
        for (std::size_t i = 0; i < a.samples[e].size(); ++i)
            d = std::max(d, std::abs(a.samples[e][i] - b.samples[e][i]) / std::abs(b.samples[e][i]));
    return d;
}

}  // namespace

TEST(Direct, ReflectingIntervalHasZeroCurrent) {
    const auto mu = assemble_and_solve(interval("-x"));
    const double z = 0.5 * std::sqrt(std::numbers::pi) * std::erf(1.0);
    for (double x : {0.0, 0.3, 1.0}) EXPECT_NEAR(mu.density[0](x), std::exp(-x * x) / z, 1e-11);
    EXPECT_NEAR(mu.current[0], 0.0, 1e-13);
    const auto sol = solve_stationarity(*interval("-x"));
    EXPECT_NEAR(sol.edges[0].k2, 0.0, 1e-13);
}

TEST(Direct, UniformWithoutDrift) {
    const auto mu = assemble_and_solve(interval("0"));
    for (double x : {0.0, 0.5, 1.0}) EXPECT_NEAR(mu.density[0](x), 1.0, 1e-13);
}

TEST(Direct, CurrentIsMinusHalfK2) {
    const auto model = make_ring_model(ex("1 + 0.3*sin(2*pi*x)"), ex("1 + 0.1*cos(2*pi*x)"));
    const auto sol = solve_stationarity(*model);
    const auto mu = measure_from_solution(model, sol);
    EXPECT_EQ(mu.current[0], -0.5 * sol.edges[0].k2);
    const auto& p = model->profile(0);
    for (double x : {0.2, 0.5, 0.8}) EXPECT_NEAR(finite_difference_current(p, mu.density[0], x, 1e-3), mu.current[0], 1e-8);
}

TEST(Direct, FaultInjectionIsDetected) {
    const auto model = theta(false);
    auto sol = solve_stationarity(*model);
    const auto good = stationarity_residuals(*model, measure_from_solution(model, sol));
    EXPECT_LT(good.max(), 1e-8);
    sol.edges[1].k2 *= 1.01;
    const auto bad = stationarity_residuals(*model, measure_from_solution(model, sol));
    EXPECT_GT(bad.max(), 1e-4);
    EXPECT_GT(bad.germ_ratio, 1e-4);
}

TEST(Direct, AgreesWithTreeFormula) {
    const auto model = theta(false);
    const auto tree = TreeMeasure(model).invariant_measure();
    const auto direct = assemble_and_solve(model);
    for (EdgeId e = 0; e < 3; ++e) {
        const double len = model->graph.edge(e).length;
        for (double f : {0.1, 0.5, 0.9}) EXPECT_NEAR(tree.density[e](f * len) / direct.density[e](f * len), 1.0, 1e-9);
        EXPECT_NEAR(tree.current[e], direct.current[e], 1e-10);
    }
    for (VertexId v = 0; v < 2; ++v) EXPECT_NEAR(tree.atoms[v], direct.atoms[v], 1e-10);
}

TEST(VertexChain, RatesUseSingleIntegral) {
    const auto model = interval("2");  // S(l) = 2
    const auto chain = vertex_chain(*model);
    EXPECT_NEAR(chain.forward[0], std::exp(2.0), 1e-12);
    EXPECT_NEAR(chain.backward[0], std::exp(-2.0), 1e-12);
    // Detailed balance with the solver's gluing constants lambda_v.
    const auto sol = solve_stationarity(*model);
    EXPECT_NEAR(sol.lambda[0] * chain.forward[0], sol.lambda[1] * chain.backward[0], 1e-12);
}

TEST(Reversibility, TreesAreAlwaysReversible) {
    auto g = MetricGraph::build({{"a", "b", "c"}, {{"ab", 1.0, "a", "b"}, {"cb", 2.0, "c", "b"}}});
    auto model = make_model(g, {{ex("3*x"), ex("1")}, {ex("-1"), ex("2")}}, VertexParams::uniform(g));
    const auto chain = vertex_chain(*model);
    EXPECT_TRUE(is_reversible(g, chain).reversible);
    EXPECT_LT(detailed_balance_residual(g, chain), 1e-12);
    const auto rev = reversible_invariant(model, chain);
    EXPECT_LT(sup_rel(*model, rev, assemble_and_solve(model)), 1e-9);
}

TEST(Reversibility, ThetaWithBalancedEdges) {
    const auto model = theta(true);
    const auto chain = vertex_chain(*model);
    const auto cert = is_reversible(model->graph, chain);
    EXPECT_TRUE(cert.reversible);
    EXPECT_LT(cert.max_violation, 1e-12);
    EXPECT_LT(detailed_balance_residual(model->graph, chain), 1e-12);
    const auto direct = assemble_and_solve(model);
    for (double j : direct.current) EXPECT_NEAR(j, 0.0, 1e-8);
    const auto rev = reversible_invariant(model, chain);
    EXPECT_LT(sup_rel(*model, rev, direct), 1e-9);
    for (VertexId v = 0; v < 2; ++v) EXPECT_NEAR(rev.atoms[v], direct.atoms[v], 1e-10);
    // Atoms proportional to pi_v alpha_v.
    EXPECT_NEAR(rev.atoms[0] / rev.atoms[1], chain.stationary[0] * 0.5 / (chain.stationary[1] * 0.25), 1e-12);
}

TEST(Reversibility, UnbalancedThetaIsRejectedWithCycle) {
    const auto model = theta(false);
    const auto chain = vertex_chain(*model);
    const auto cert = is_reversible(model->graph, chain);
    EXPECT_FALSE(cert.reversible);
    ASSERT_EQ(cert.cycle.size(), 2u);
    const auto direct = assemble_and_solve(model);
    double jmax = 0.0;
    for (double j : direct.current) jmax = std::max(jmax, std::abs(j));
    EXPECT_GT(jmax, 1e-3);
    try {
        reversible_invariant(model, chain);
        FAIL() << "expected InapplicableError";
    } catch (const InapplicableError& e) {
        EXPECT_NE(std::string(e.what()).find("edges ["), std::string::npos);
    }
}

TEST(Reversibility, RingWithWindingHasLoopCertificate) {
    const auto ring = make_ring_model(ex("1"), ex("1"));
    const auto cert = is_reversible(ring->graph, vertex_chain(*ring));
    EXPECT_FALSE(cert.reversible);
    EXPECT_EQ(cert.cycle, std::vector<EdgeId>{0});
    const auto flat = make_ring_model(ex("sin(2*pi*x)"), ex("1"));
    EXPECT_TRUE(is_reversible(flat->graph, vertex_chain(*flat)).reversible);
    EXPECT_NEAR(assemble_and_solve(flat).current[0], 0.0, 1e-10);
}
