#pragma once

// Direct stationarity solver and the reversible fast path.
//
// On each edge the stationary density has the closed form
//   mu_e(x) = (k1 + k2 E(x)) exp(2 S(x)) / sigma^2(x),   E(x) = int_0^x exp(-2 S),
// with constant current J_e = -k2 / 2. The constants, together with the
// vertex multipliers lambda_v, solve the linear system made of the gluing
// conditions 1/2 sigma^2 mu_e(v) = lambda_v alpha_{v,e} at every germ and zero
// divergence at every vertex but one. The normalization takes the place of
// the remaining divergence row.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "discrete.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "measure.hpp"
#include "profile.hpp"
#include "quadrature.hpp"

namespace metree {

struct EdgeSolution {
    double k1 = 0.0;
    double k2 = 0.0;

    double current() const { return -0.5 * k2; }
};

struct DirectSolution {
    std::vector<EdgeSolution> edges;
    std::vector<double> lambda;  // per vertex
};

namespace detail {

inline double edge_density(const EdgeProfile& p, const EdgeSolution& k, double x) {
    return (k.k1 + k.k2 * p.E(x)) * std::exp(2.0 * p.S(x)) / p.sigma2(x);
}

}  // namespace detail

/// Solves the stationarity system. Throws NumericalError if the system,
/// stripped of the normalization row, is not of corank exactly one.
inline DirectSolution solve_stationarity(const Model& m) {
    const auto& g = m.graph;
    const auto ne = static_cast<Eigen::Index>(g.num_edges());
    const auto nv = static_cast<Eigen::Index>(g.num_vertices());
    const Eigen::Index n = 2 * ne + nv;
    auto k1 = [](EdgeId e) { return static_cast<Eigen::Index>(2 * e); };
    auto k2 = [](EdgeId e) { return static_cast<Eigen::Index>(2 * e + 1); };
    auto lam = [ne](VertexId v) { return 2 * ne + static_cast<Eigen::Index>(v); };

    // Homogeneous part: 2|E| gluing rows followed by |V| divergence rows.
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * ne + nv, n);
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& me = g.edge(e);
        const auto& p = m.profile(e);
        const auto row = static_cast<Eigen::Index>(2 * e);
        h(row, k1(e)) = 0.5;
        h(row, lam(me.tail)) -= m.params.alpha_tail[e];
        const double grow = std::exp(2.0 * p.S_total());
        h(row + 1, k1(e)) = 0.5 * grow;
        h(row + 1, k2(e)) = 0.5 * grow * p.E_total();
        h(row + 1, lam(me.head)) -= m.params.alpha_head[e];
        // Divergence: J_e = -k2/2 leaves the tail and enters the head.
        h(2 * ne + static_cast<Eigen::Index>(me.tail), k2(e)) += -0.5;
        h(2 * ne + static_cast<Eigen::Index>(me.head), k2(e)) -= -0.5;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(h);
    rank_check.setThreshold(1e-12);
    if (rank_check.rank() != n - 1)
        throw NumericalError(
            fmt::format("stationarity system has rank {} (expected {})", rank_check.rank(), n - 1));

    // Square system: drop the divergence row of vertex 0, add normalization.
    Eigen::MatrixXd a(n, n);
    a.topRows(2 * ne) = h.topRows(2 * ne);
    if (nv > 1) a.middleRows(2 * ne, nv - 1) = h.bottomRows(nv - 1);
    Eigen::RowVectorXd norm = Eigen::RowVectorXd::Zero(n);
    const auto opt = m.numerics.quadrature();
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& p = m.profile(e);
        const double len = p.length();
        norm(k1(e)) = integrate([&](double x) { return std::exp(2.0 * p.S(x)) / p.sigma2(x); }, 0.0, len, opt);
        norm(k2(e)) = integrate([&](double x) { return p.E(x) * std::exp(2.0 * p.S(x)) / p.sigma2(x); }, 0.0, len, opt);
    }
    for (VertexId v = 0; v < g.num_vertices(); ++v) norm(lam(v)) = m.params.alpha[v];
    a.row(n - 1) = norm;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;

    const Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(rhs);
    if (!sol.allFinite()) throw NumericalError("stationarity system solve produced non-finite values");

    DirectSolution out;
    for (EdgeId e = 0; e < g.num_edges(); ++e) out.edges.push_back({sol(k1(e)), sol(k2(e))});
    for (VertexId v = 0; v < g.num_vertices(); ++v) out.lambda.push_back(sol(lam(v)));
    return out;
}

/// Measure induced by a set of edge constants (not necessarily a solution).
inline Measure measure_from_solution(const ModelPtr& model, const DirectSolution& sol, std::string method = "direct") {
    const Model& m = *model;
    Measure out;
    out.method = std::move(method);
    for (VertexId v = 0; v < m.graph.num_vertices(); ++v) out.atoms.push_back(sol.lambda[v] * m.params.alpha[v]);
    for (EdgeId e = 0; e < m.graph.num_edges(); ++e) {
        const EdgeSolution k = sol.edges[e];
        out.density.push_back([model, e, k](double x) { return detail::edge_density(model->profile(e), k, x); });
        out.current.push_back(k.current());
    }
    sample_measure(out, m.graph, m.numerics.grid);
    return out;
}

inline Measure assemble_and_solve(const ModelPtr& model) { return measure_from_solution(model, solve_stationarity(*model)); }

struct ResidualReport {
    double current_variation = 0.0;  // max over edges of |J(x) - mean J| along the edge
    double vertex_divergence = 0.0;  // max over vertices of |sum_{A+} J - sum_{A-} J|
    double germ_ratio = 0.0;         // max relative violation of the gluing conditions
    double normalization = 0.0;      // |total mass - 1|
    double reported_current = 0.0;   // max |mean J - Measure::current|
    std::vector<double> edge_current;  // mean finite-difference current per edge

    double max() const {
        return std::max({current_variation, vertex_divergence, germ_ratio, normalization, reported_current});
    }
};

/// Probability current -1/2 d/dx(sigma^2 mu) + b mu by fourth-order central
/// differences of the density evaluator.
inline double finite_difference_current(const EdgeProfile& p, const std::function<double(double)>& mu, double x,
                                        double h) {
    auto flux = [&](double y) { return p.sigma2(y) * mu(y); };
    const double d = (-flux(x + 2 * h) + 8 * flux(x + h) - 8 * flux(x - h) + flux(x - 2 * h)) / (12 * h);
    return -0.5 * d + p.b(x) * mu(x);
}

/// Residuals of the stationarity conditions, computed from the density
/// evaluators alone (currents by finite differences).
inline ResidualReport stationarity_residuals(const Model& m, const Measure& mu, int points = 65) {
    const auto& g = m.graph;
    ResidualReport r;
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& p = m.profile(e);
        const double len = p.length();
        const double h = 1e-3 * len;
        std::vector<double> js;
        for (int i = 0; i < points; ++i) {
            const double x = 2 * h + (len - 4 * h) * i / (points - 1);
            js.push_back(finite_difference_current(p, mu.density[e], x, h));
        }
        double mean = 0.0;
        for (double j : js) mean += j;
        mean /= js.size();
        for (double j : js) r.current_variation = std::max(r.current_variation, std::abs(j - mean));
        r.edge_current.push_back(mean);
        if (e < mu.current.size()) r.reported_current = std::max(r.reported_current, std::abs(mean - mu.current[e]));
    }
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        double div = 0.0;
        for (EdgeId e : g.exiting(v)) div += r.edge_current[e];
        for (EdgeId e : g.entering(v)) div -= r.edge_current[e];
        r.vertex_divergence = std::max(r.vertex_divergence, std::abs(div));

        std::vector<double> lambdas;
        for (const auto& germ : g.germs(v)) {
            const double x = g.edge(germ.edge).coordinate(germ.side);
            lambdas.push_back(0.5 * m.profile(germ.edge).sigma2(x) * mu.density[germ.edge](x) /
                              m.params.germ_alpha(germ));
        }
        double mean = 0.0;
        for (double l : lambdas) mean += l;
        mean /= lambdas.size();
        for (double l : lambdas) r.germ_ratio = std::max(r.germ_ratio, std::abs(l - mean) / std::abs(mean));
        if (m.params.alpha[v] > 0.0) {
            const double expected = mean * m.params.alpha[v];
            r.germ_ratio = std::max(r.germ_ratio, std::abs(mu.atoms[v] - expected) / std::abs(expected));
        } else {
            r.germ_ratio = std::max(r.germ_ratio, std::abs(mu.atoms[v]));
        }
    }
    double mass = 0.0;
    for (double a : mu.atoms) mass += a;
    const auto opt = m.numerics.quadrature();
    for (EdgeId e = 0; e < g.num_edges(); ++e) mass += integrate(mu.density[e], 0.0, g.edge(e).length, opt);
    r.normalization = std::abs(mass - 1.0);
    return r;
}

/// Effective chain on the vertices: across edge e from tail t to head h the
/// rate is alpha_{t,e} exp(S_e(l)), back from h to t alpha_{h,e} exp(-S_e(l)).
struct VertexChain {
    struct Transition {
        VertexId from;
        VertexId to;
        EdgeId edge;
        double rate;
    };
    std::size_t num_states = 0;
    std::vector<Transition> transitions;  // two per edge: forward then backward
    std::vector<double> forward, backward;  // per edge
    std::vector<double> stationary;

    FiniteChain finite_chain() const {
        FiniteChain c(num_states);
        for (const auto& t : transitions) c.add_rate(t.from, t.to, t.rate);
        return c;
    }
};

inline VertexChain vertex_chain(const Model& m) {
    const auto& g = m.graph;
    VertexChain chain;
    chain.num_states = g.num_vertices();
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& me = g.edge(e);
        const double w = m.profile(e).S_total();
        const double fwd = m.params.alpha_tail[e] * std::exp(w);
        const double bwd = m.params.alpha_head[e] * std::exp(-w);
        chain.forward.push_back(fwd);
        chain.backward.push_back(bwd);
        chain.transitions.push_back({me.tail, me.head, e, fwd});
        chain.transitions.push_back({me.head, me.tail, e, bwd});
    }
    chain.stationary = chain.num_states == 1 ? std::vector<double>{1.0} : stationary_linear(chain.finite_chain());
    return chain;
}

struct ReversibilityResult {
    bool reversible = true;
    std::vector<EdgeId> cycle;   // violating cycle when not reversible
    double max_violation = 0.0;  // largest |log of the cycle rate ratio|
};

/// Kolmogorov criterion over the fundamental cycles of a spanning tree,
/// including parallel edges and loops.
inline ReversibilityResult is_reversible(const MetricGraph& g, const VertexChain& chain, double tol = 1e-9) {
    ReversibilityResult res;
    const auto trees = spanning_trees(g);
    const SpanningTree& t = trees.front();

    // log lambda along the tree from vertex 0.
    const Routing routing = route_toward(g, t.tree, {0});
    std::vector<double> potential(g.num_vertices(), 0.0);
    std::vector<bool> done(g.num_vertices(), false);
    done[0] = true;
    auto resolve = [&](auto&& self, VertexId v) -> double {
        if (done[v]) return potential[v];
        const Germ step = *routing.exit[v];
        const auto& me = g.edge(step.edge);
        const VertexId parent = step.side == Side::tail ? me.head : me.tail;
        const double up = self(self, parent);
        // lambda_tail * fwd = lambda_head * bwd
        const double ratio = std::log(chain.forward[step.edge]) - std::log(chain.backward[step.edge]);
        potential[v] = step.side == Side::tail ? up - ratio : up + ratio;
        done[v] = true;
        return potential[v];
    };
    for (VertexId v = 0; v < g.num_vertices(); ++v) resolve(resolve, v);

    for (EdgeId c : t.cut) {
        const auto& me = g.edge(c);
        const double violation = std::abs(potential[me.tail] + std::log(chain.forward[c]) - potential[me.head] -
                                          std::log(chain.backward[c]));
        res.max_violation = std::max(res.max_violation, violation);
        if (violation > tol && res.reversible) {
            res.reversible = false;
            res.cycle.push_back(c);
            if (!me.is_loop()) {
                const Routing to_tail = route_toward(g, t.tree, {me.tail});
                VertexId v = me.head;
                while (v != me.tail) {
                    const Germ step = *to_tail.exit[v];
                    res.cycle.push_back(step.edge);
                    v = g.edge(step.edge).endpoint(step.side == Side::tail ? Side::head : Side::tail);
                }
            }
        }
    }
    return res;
}

/// max over edges of |pi_t q(t,h) - pi_h q(h,t)|.
inline double detailed_balance_residual(const MetricGraph& g, const VertexChain& chain) {
    double r = 0.0;
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& me = g.edge(e);
        r = std::max(r, std::abs(chain.stationary[me.tail] * chain.forward[e] -
                                 chain.stationary[me.head] * chain.backward[e]));
    }
    return r;
}

/// Zero-current invariant measure built from the vertex chain law pi:
///   mu_e(x) = 2 c pi_t q(t,h) exp(S(x) - (S(l) - S(x))) / sigma^2(x),  mu_v = c pi_v alpha_v.
inline Measure reversible_invariant(const ModelPtr& model, const VertexChain& chain) {
    const Model& m = *model;
    const auto& g = m.graph;
    const auto rev = is_reversible(g, chain);
    if (!rev.reversible) {
        std::string names;
        for (EdgeId e : rev.cycle) names += (names.empty() ? "" : ", ") + g.edge(e).name;
        throw InapplicableError(fmt::format("model is not reversible: rate cycle through edges [{}] is unbalanced", names));
    }
    const auto opt = m.numerics.quadrature();
    std::vector<double> amplitude(g.num_edges());
    double mass = 0.0;
    for (VertexId v = 0; v < g.num_vertices(); ++v) mass += chain.stationary[v] * m.params.alpha[v];
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& p = m.profile(e);
        amplitude[e] = 2.0 * chain.stationary[g.edge(e).tail] * chain.forward[e];
        const double sl = p.S_total();
        mass += amplitude[e] *
                integrate([&](double x) { return std::exp(2.0 * p.S(x) - sl) / p.sigma2(x); }, 0.0, p.length(), opt);
    }
    const double c = 1.0 / mass;

    Measure out;
    out.method = "reversible";
    out.normalization = mass;
    for (VertexId v = 0; v < g.num_vertices(); ++v) out.atoms.push_back(c * chain.stationary[v] * m.params.alpha[v]);
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const double amp = c * amplitude[e];
        out.density.push_back([model, e, amp](double x) {
            const auto& p = model->profile(e);
            return amp * std::exp(2.0 * p.S(x) - p.S_total()) / p.sigma2(x);
        });
        out.current.push_back(0.0);
    }
    sample_measure(out, g, m.numerics.grid);
    return out;
}

}  // namespace metree
