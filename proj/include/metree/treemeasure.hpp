#pragma once

// Invariant measure of a diffusion on a metric graph as a superposition of
// metric-arborescence weights.
//
// For a root x on edge r the unnormalized density is
//
//   m_r(x) = sum_T  int_{C(T)} dy  R(tau_x[y]),
//   R(tau) = exp(int_tau s) / sigma_r^2(x) * prod_v W_v(tau),
//
// where T runs over spanning trees, y over one cut per edge outside T and
// W_v = K_v alpha_{v,e} for the single germ through which v exits (1 for
// entering germs). Both halves of a cut edge always enter their vertices,
// so node weights do not depend on the cut positions and the integral
// splits into one-dimensional gates G_c = int_0^l exp(S_c(l) - 2 S_c(y)) dy
// per cut edge. Only a cut on r itself interacts with x: the cases y < x
// and y > x route the tree to different endpoints of r.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <fmt/format.h>

#include "errors.hpp"
#include "graph.hpp"
#include "measure.hpp"
#include "profile.hpp"
#include "quadrature.hpp"

namespace metree {

/// Factors of the arborescence integral for one spanning tree and root.
struct TreeFactorization {
    bool root_cut = false;
    double root_factor = 0.0;  // 1 / sigma^2(x)
    std::vector<std::pair<EdgeId, double>> gates;  // cut edges other than the root edge
    // Root edge in the tree: exp(S(x) - (S(l) - S(x))) times the routing weight.
    double split_uncut = 0.0;
    double routing_uncut = 0.0;  // exp(sum of +-S_f(l)) * node-weight product
    // Root edge cut below / above x.
    double split_below = 0.0;  // exp(2 S(x) - S(l)) * E(x)
    double split_above = 0.0;  // exp(2 S(x) + S(l)) * (E(l) - E(x))
    double routing_below = 0.0;
    double routing_above = 0.0;

    double gate_product() const {
        double p = 1.0;
        for (const auto& g : gates) p *= g.second;
        return p;
    }

    double value() const {
        const double root = root_cut ? split_below * routing_below + split_above * routing_above
                                     : split_uncut * routing_uncut;
        return root_factor * gate_product() * root;
    }
};

struct BruteForceOptions {
    int order = 24;
    int panels = 2;
    std::size_t max_dimension = 3;
};

class TreeMeasure {
public:
    explicit TreeMeasure(ModelPtr model) : state_(std::make_shared<State>(std::move(model))) {}

    const Model& model() const { return *state_->model; }
    const std::vector<SpanningTree>& trees() const { return state_->trees; }

    /// R(tau) evaluated directly from the orientation of every segment and germ.
    double arborescence_weight(const Arborescence& tau) const {
        const Model& m = model();
        double exponent = 0.0;
        for (EdgeId e = 0; e < m.graph.num_edges(); ++e)
            for (const auto& seg : tau.segments[e]) exponent += m.profile(e).oriented_integral(seg.from, seg.to);
        double nodes = 1.0;
        for (VertexId v = 0; v < m.graph.num_vertices(); ++v)
            for (const auto& germ : m.graph.germs(v))
                if (tau.sign(germ) > 0) nodes *= m.params.w_plus(germ);
        return std::exp(exponent) / m.profile(tau.root.edge).sigma2(tau.root.x) * nodes;
    }

    TreeFactorization factorization(std::size_t tree_index, Point x) const {
        return state_->factorize(tree_index, x.edge, x.x);
    }

    /// Unnormalized density m_e(x) at an interior point.
    double density(Point p) const {
        check_interior(p);
        return state_->density(p.edge, p.x);
    }

    /// Same as density() but by tensor-product quadrature over every cut
    /// position, building each arborescence explicitly.
    double density_bruteforce(Point p, const BruteForceOptions& opt = {}) const {
        check_interior(p);
        const Model& m = model();
        if (m.graph.cut_space_dimension() > opt.max_dimension)
            throw InapplicableError(fmt::format("brute-force quadrature limited to cut dimension {} (graph has {})",
                                                opt.max_dimension, m.graph.cut_space_dimension()));
        double total = 0.0;
        for (std::size_t t = 0; t < trees().size(); ++t) total += tree_integral_bruteforce(t, p, opt);
        return total;
    }

    double tree_integral_bruteforce(std::size_t tree_index, Point p, const BruteForceOptions& opt = {}) const {
        const Model& m = model();
        const SpanningTree& T = trees().at(tree_index);

        // Per cut edge: quadrature nodes and weights; the root edge is split at x.
        std::vector<std::vector<std::pair<double, double>>> rules;
        const GaussRule& rule = gauss_legendre(opt.order);
        auto add_interval = [&](std::vector<std::pair<double, double>>& out, double a, double b) {
            const double h = (b - a) / opt.panels;
            for (int k = 0; k < opt.panels; ++k) {
                const double mid = a + (k + 0.5) * h;
                for (int i = 0; i < opt.order; ++i)
                    out.emplace_back(mid + 0.5 * h * rule.nodes[i], 0.5 * h * rule.weights[i]);
            }
        };
        for (EdgeId c : T.cut) {
            std::vector<std::pair<double, double>> r;
            const double len = m.graph.edge(c).length;
            if (c == p.edge) {
                add_interval(r, 0.0, p.x);
                add_interval(r, p.x, len);
            } else {
                add_interval(r, 0.0, len);
            }
            rules.push_back(std::move(r));
        }

        std::vector<std::size_t> index(rules.size(), 0);
        double total = 0.0;
        for (;;) {
            CutSet cuts;
            double weight = 1.0;
            for (std::size_t d = 0; d < rules.size(); ++d) {
                cuts.cuts.push_back({T.cut[d], rules[d][index[d]].first});
                weight *= rules[d][index[d]].second;
            }
            total += weight * arborescence_weight(arborescence(m.graph, T, cuts, p));

            std::size_t d = 0;
            while (d < rules.size() && ++index[d] == rules[d].size()) index[d++] = 0;
            if (d == rules.size()) break;
        }
        return total;
    }

    /// lim_{y -> v} sigma_e^2(y) m_e(y) / alpha_{v,e}, checked to agree over
    /// every germ at v.
    double vertex_atom_scale(VertexId v, double rel_tol = 1e-6) const {
        const auto values = germ_limits(v);
        const double ref = values.front();
        for (double val : values)
            if (std::abs(val - ref) > rel_tol * std::max(std::abs(ref), std::abs(val)))
                throw NumericalError(fmt::format(
                    "germ limits at vertex '{}' disagree: {:.17g} vs {:.17g}", model().graph.vertex_name(v), ref, val));
        return ref;
    }

    /// sigma^2 m / alpha at every germ of v, in germ order.
    std::vector<double> germ_limits(VertexId v) const {
        const Model& m = model();
        std::vector<double> out;
        for (const auto& germ : m.graph.germs(v)) {
            const double x = m.graph.edge(germ.edge).coordinate(germ.side);
            out.push_back(m.profile(germ.edge).sigma2(x) * state_->density(germ.edge, x) / m.params.germ_alpha(germ));
        }
        return out;
    }

    /// Current of the unnormalized construction through e, positive along
    /// the canonical orientation: half the difference between unicyclic
    /// subgraphs whose cycle runs along e and those running against it.
    double edge_current(EdgeId e) const {
        const Model& m = model();
        double j = 0.0;
        for (const auto& L : unicyclic_subgraphs(m.graph, e)) {
            double exponent = 0.0;
            for (EdgeId f : L.edges) exponent += L.direction[f] * m.profile(f).S_total();
            double w = std::exp(exponent);
            for (EdgeId c : L.cut) w *= state_->gate[c];
            for (VertexId v = 0; v < m.graph.num_vertices(); ++v) w *= m.params.w_plus(L.exit[v]);
            j += L.orientation * w;
        }
        return 0.5 * j;
    }

    /// Normalized measure: densities m/Z, atoms lambda_v alpha_v / Z with
    /// lambda_v = sigma^2 m / (2 alpha_{v,e}) the gluing constant of m.
    Measure invariant_measure() const {
        const Model& m = model();
        const auto opt = m.numerics.quadrature();
        std::vector<double> atoms(m.graph.num_vertices(), 0.0);
        double z = 0.0;
        for (VertexId v = 0; v < m.graph.num_vertices(); ++v) {
            const double lambda = 0.5 * vertex_atom_scale(v);
            atoms[v] = m.params.alpha[v] == 0.0 ? 0.0 : lambda * m.params.alpha[v];
            z += atoms[v];
        }
        for (EdgeId e = 0; e < m.graph.num_edges(); ++e)
            z += integrate([&](double x) { return state_->density(e, x); }, 0.0, m.graph.edge(e).length, opt);

        Measure out;
        out.method = "tree";
        out.normalization = z;
        for (double& a : atoms) a /= z;
        out.atoms = std::move(atoms);
        for (EdgeId e = 0; e < m.graph.num_edges(); ++e) {
            out.density.push_back([state = state_, e, z](double x) { return state->density(e, x) / z; });
            out.current.push_back(edge_current(e) / z);
        }
        sample_measure(out, m.graph, m.numerics.grid);
        return out;
    }

private:
    struct State {
        ModelPtr model;
        std::vector<SpanningTree> trees;
        std::vector<double> gate;  // per edge
        // Routing weights exp(sum +-S_f(l)) * prod W+, per (tree, root edge).
        std::vector<std::vector<double>> routing_uncut, routing_below, routing_above;

        explicit State(ModelPtr m) : model(std::move(m)), trees(spanning_trees(model->graph)) {
            const auto& g = model->graph;
            for (EdgeId e = 0; e < g.num_edges(); ++e) {
                const auto& p = model->profile(e);
                gate.push_back(std::exp(p.S_total()) * p.E_total());
            }
            routing_uncut.assign(trees.size(), std::vector<double>(g.num_edges(), 0.0));
            routing_below = routing_uncut;
            routing_above = routing_uncut;
            for (std::size_t t = 0; t < trees.size(); ++t) {
                const auto& T = trees[t];
                for (EdgeId r = 0; r < g.num_edges(); ++r) {
                    const auto& re = g.edge(r);
                    if (T.contains(r)) {
                        std::vector<EdgeId> rest;
                        for (EdgeId f : T.tree)
                            if (f != r) rest.push_back(f);
                        routing_uncut[t][r] = routing_weight(rest, {{re.tail, r, Side::tail}, {re.head, r, Side::head}});
                    } else {
                        routing_below[t][r] = routing_weight(T.tree, {{re.head, r, Side::head}});
                        routing_above[t][r] = routing_weight(T.tree, {{re.tail, r, Side::tail}});
                    }
                }
            }
        }

        double routing_weight(const std::vector<EdgeId>& edges, const std::vector<Germ>& anchor_exits) const {
            const auto& g = model->graph;
            std::vector<VertexId> anchors;
            for (const auto& germ : anchor_exits) anchors.push_back(germ.vertex);
            const Routing r = route_toward(g, edges, anchors);
            double exponent = 0.0;
            for (EdgeId f : edges) exponent += r.direction[f] * model->profile(f).S_total();
            double w = std::exp(exponent);
            for (VertexId v = 0; v < g.num_vertices(); ++v)
                if (r.exit[v]) w *= model->params.w_plus(*r.exit[v]);
            for (const auto& germ : anchor_exits) w *= model->params.w_plus(germ);
            return w;
        }

        TreeFactorization factorize(std::size_t t, EdgeId r, double x) const {
            const auto& T = trees.at(t);
            const auto& p = model->profile(r);
            TreeFactorization f;
            f.root_cut = !T.contains(r);
            f.root_factor = 1.0 / p.sigma2(x);
            for (EdgeId c : T.cut)
                if (c != r) f.gates.emplace_back(c, gate[c]);
            const double sx = p.S(x), sl = p.S_total();
            if (!f.root_cut) {
                f.split_uncut = std::exp(2.0 * sx - sl);
                f.routing_uncut = routing_uncut[t][r];
            } else {
                const double ex = p.E(x);
                f.split_below = std::exp(2.0 * sx - sl) * ex;
                f.split_above = std::exp(2.0 * sx + sl) * (p.E_total() - ex);
                f.routing_below = routing_below[t][r];
                f.routing_above = routing_above[t][r];
            }
            return f;
        }

        // Valid on the closed edge; endpoint values are the one-sided limits.
        double density(EdgeId r, double x) const {
            double total = 0.0;
            for (std::size_t t = 0; t < trees.size(); ++t) total += factorize(t, r, x).value();
            return total;
        }
    };

    std::shared_ptr<const State> state_;

    void check_interior(Point p) const {
        const auto& g = model().graph;
        if (p.edge >= g.num_edges()) throw GraphError("point on unknown edge");
        if (!(p.x > 0.0 && p.x < g.edge(p.edge).length))
            throw InapplicableError("density is defined inside edges; use vertex_atom_scale at vertices");
    }
};

/// The ring density as a single quadrature over the cut position,
///   mu(x) = 1/(Z sigma^2(x)) int_x^{x+l} exp(2 S(x) - 2 S(y)) dy,
/// with S continued periodically plus its winding S(l).
class RingClosedForm {
public:
    explicit RingClosedForm(ModelPtr model) : model_(std::move(model)) {
        const auto& g = model_->graph;
        if (g.num_vertices() != 1 || g.num_edges() != 1 || !g.edge(0).is_loop())
            throw InapplicableError("ring closed form needs a single vertex with a single loop");
        const auto& prm = model_->params;
        if (prm.alpha[0] != 0.0 || prm.alpha_tail[0] != prm.alpha_head[0])
            throw InapplicableError("ring closed form needs alpha_v = 0 and equal germ weights");
        z_ = integrate([this](double x) { return unnormalized(x); }, 0.0, g.edge(0).length, model_->numerics.quadrature());
    }

    double operator()(double x) const { return unnormalized(x) / z_; }
    double normalization() const { return z_; }

    /// -Delta psi / (2 Z_psi) for the integrand psi(y, x) normalized as
    /// exp(int_{I+[y,x]} s + int_{I-[y,x]} s).
    double current() const {
        const double w = model_->profile(0).S_total();
        const double delta_psi = std::exp(-w) - std::exp(w);
        return -delta_psi / (2.0 * z_ * std::exp(w));
    }

private:
    ModelPtr model_;
    double z_ = 1.0;

    double unnormalized(double x) const {
        const auto& p = model_->profile(0);
        const double len = p.length(), sx = p.S(x), sl = p.S_total();
        const auto opt = model_->numerics.quadrature();
        const double upper = integrate([&](double y) { return std::exp(2.0 * sx - 2.0 * p.S(y)); }, x, len, opt);
        const double wrapped =
            integrate([&](double y) { return std::exp(2.0 * sx - 2.0 * (p.S(y) + sl)); }, 0.0, x, opt);
        return (upper + wrapped) / p.sigma2(x);
    }
};

}  // namespace metree
