#pragma once

// Edge coefficients (drift b, diffusion sigma) and vertex parameters, bundled
// into the Model consumed by the measure computations.

#include <cmath>
#include <memory>
#include <vector>

#include <fmt/format.h>

#include "errors.hpp"
#include "expression.hpp"
#include "graph.hpp"
#include "quadrature.hpp"

namespace metree {

struct Numerics {
    double tol = 1e-10;        // quadrature tolerance
    int quad_order = 16;       // base Gauss-Legendre order
    int max_refine = 12;       // panel doublings
    int grid = 257;            // output samples per edge
    double compare_tol = 1e-6; // cross-method agreement threshold

    QuadratureOptions quadrature() const { return {tol, quad_order, max_refine}; }
};

/// Coefficients on one edge with cached cumulative integrals
///   S(x) = int_0^x s,  s = b / sigma^2,
///   E(x) = int_0^x exp(-2 S).
/// S is the single integral; formulas needing the doubled exponent apply
/// the factor themselves.
class EdgeProfile {
public:
    static constexpr int positivity_samples = 1024;

    EdgeProfile(double length, Expression b, Expression sigma, const Numerics& numerics = {},
                std::string name = "edge")
        : length_(length), b_(std::move(b)), sigma_(std::move(sigma)), name_(std::move(name)) {
        check_sigma();
        const auto opt = numerics.quadrature();
        s_table_ = CumulativeIntegral([this](double x) { return s(x); }, 0.0, length_, opt);
        e_table_ = CumulativeIntegral([this](double x) { return std::exp(-2.0 * S(x)); }, 0.0, length_, opt);
    }

    double length() const noexcept { return length_; }
    const std::string& name() const noexcept { return name_; }
    const Expression& drift() const noexcept { return b_; }
    const Expression& diffusion() const noexcept { return sigma_; }

    double b(double x) const { return b_(x); }
    double sigma(double x) const { return sigma_(x); }
    double sigma2(double x) const {
        const double v = sigma_(x);
        return v * v;
    }
    double s(double x) const { return b(x) / sigma2(x); }

    double S(double x) const { return s_table_(x); }
    double S_total() const { return s_table_.total(); }
    const CumulativeIntegral& cumulative_s() const noexcept { return s_table_; }

    double E(double x) const { return e_table_(x); }
    double E_total() const { return e_table_.total(); }

    /// Integral of s over the segment oriented from `from` to `to`.
    double oriented_integral(double from, double to) const { return S(to) - S(from); }

private:
    double length_;
    Expression b_, sigma_;
    std::string name_;
    CumulativeIntegral s_table_, e_table_;

    void check_sigma() const {
        // Dense sampling only; not a proof of positivity.
        for (int i = 0; i <= positivity_samples; ++i) {
            const double x = length_ * i / positivity_samples;
            const double v = sigma_(x);
            if (!(v > 0.0))
                throw DomainError(fmt::format("sigma on edge '{}' is not positive at x = {} (value {})", name_, x, v));
        }
    }
};

/// Vertex parameters: sojourn weights alpha_v, germ weights alpha_{v,e}
/// (stored per edge side so that loops carry two), and the free constants
/// K_v. Node weights are W+ = K_v alpha_{v,e} and W- = 1.
struct VertexParams {
    std::vector<double> alpha;       // per vertex
    std::vector<double> K;           // per vertex
    std::vector<double> alpha_tail;  // per edge: alpha_{tail(e), e}
    std::vector<double> alpha_head;  // per edge: alpha_{head(e), e}

    static VertexParams uniform(const MetricGraph& g, double alpha_v = 0.0, double alpha_ve = 1.0) {
        VertexParams p;
        p.alpha.assign(g.num_vertices(), alpha_v);
        p.K.assign(g.num_vertices(), 1.0);
        p.alpha_tail.assign(g.num_edges(), alpha_ve);
        p.alpha_head.assign(g.num_edges(), alpha_ve);
        return p;
    }

    double germ_alpha(const Germ& g) const { return g.side == Side::tail ? alpha_tail.at(g.edge) : alpha_head.at(g.edge); }
    double& germ_alpha(const Germ& g) { return g.side == Side::tail ? alpha_tail.at(g.edge) : alpha_head.at(g.edge); }
    double w_plus(const Germ& g) const { return K.at(g.vertex) * germ_alpha(g); }

    void validate(const MetricGraph& g) const {
        if (alpha.size() != g.num_vertices() || K.size() != g.num_vertices() ||
            alpha_tail.size() != g.num_edges() || alpha_head.size() != g.num_edges())
            throw ConfigError("vertex parameters do not match the graph");
        for (VertexId v = 0; v < g.num_vertices(); ++v) validate_vertex(g, v);
    }

    void validate_vertex(const MetricGraph& g, VertexId v) const {
        const auto& name = g.vertex_name(v);
        if (!(alpha[v] >= 0.0) || !std::isfinite(alpha[v]))
            throw ConfigError(fmt::format("vertex '{}': alpha must be finite and nonnegative", name));
        if (!(K[v] > 0.0) || !std::isfinite(K[v])) throw ConfigError(fmt::format("vertex '{}': K must be positive", name));
        double total = alpha[v];
        for (const auto& germ : g.germs(v)) total += germ_alpha(germ);
        if (!(total > 0.0))
            throw ConfigError(fmt::format("vertex '{}': alpha_v plus the sum of alpha_ve must be positive", name));
        for (const auto& germ : g.germs(v)) {
            const double a = germ_alpha(germ);
            if (!(a > 0.0) || !std::isfinite(a))
                throw ConfigError(fmt::format("vertex '{}': alpha for edge '{}' ({}) must be positive", name,
                                              g.edge(germ.edge).name, germ.side == Side::tail ? "tail" : "head"));
        }
    }
};

/// One diffusion model on a metric graph, ready for the measure computations.
struct Model {
    MetricGraph graph;
    std::vector<EdgeProfile> profiles;
    VertexParams params;
    Numerics numerics;

    const EdgeProfile& profile(EdgeId e) const { return profiles.at(e); }
};

using ModelPtr = std::shared_ptr<const Model>;

/// Builds a model from per-edge coefficient expressions (one pair per
/// edge, in edge order).
inline ModelPtr make_model(MetricGraph graph, const std::vector<std::pair<Expression, Expression>>& coefficients,
                           VertexParams params, Numerics numerics = {}) {
    if (coefficients.size() != graph.num_edges()) throw ConfigError("one coefficient pair per edge is required");
    params.validate(graph);
    auto m = std::make_shared<Model>();
    m->numerics = numerics;
    for (EdgeId e = 0; e < graph.num_edges(); ++e)
        m->profiles.emplace_back(graph.edge(e).length, coefficients[e].first, coefficients[e].second, numerics,
                                 graph.edge(e).name);
    m->graph = std::move(graph);
    m->params = std::move(params);
    return m;
}

}  // namespace metree
