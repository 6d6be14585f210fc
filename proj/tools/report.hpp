#pragma once

// Text, CSV and JSON renderings of the command results.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "metree/measure.hpp"
#include "metree/profile.hpp"
#include "metree/scaling.hpp"
#include "metree/solver.hpp"
#include "metree/treemeasure.hpp"

namespace metree::cli {

using nlohmann::json;

inline std::string format_double(double v) { return fmt::format("{:.17g}", v); }

inline json residuals_json(const ResidualReport& r) {
    return {{"current_variation", r.current_variation}, {"vertex_divergence", r.vertex_divergence},
            {"germ_ratio", r.germ_ratio},               {"normalization", r.normalization},
            {"current_mismatch", r.reported_current},   {"max", r.max()}};
}

inline json measure_json(const Model& m, const Measure& mu, const ResidualReport& res) {
    json out;
    out["method"] = mu.method;
    out["normalization"] = mu.normalization;
    json vertices = json::array();
    for (VertexId v = 0; v < m.graph.num_vertices(); ++v)
        vertices.push_back({{"name", m.graph.vertex_name(v)}, {"atom", mu.atoms[v]}});
    out["vertices"] = std::move(vertices);
    json edges = json::array();
    for (EdgeId e = 0; e < m.graph.num_edges(); ++e)
        edges.push_back({{"id", m.graph.edge(e).name},
                         {"current", mu.current[e]},
                         {"x", mu.grid[e]},
                         {"density", mu.samples[e]}});
    out["edges"] = std::move(edges);
    out["residuals"] = residuals_json(res);
    return out;
}

/// Header `edge,x,density`, one row per grid point, 17 significant digits.
inline void write_density_csv(std::ostream& os, const Model& m, const Measure& mu) {
    os << "edge,x,density\n";
    for (EdgeId e = 0; e < m.graph.num_edges(); ++e)
        for (std::size_t i = 0; i < mu.grid[e].size(); ++i)
            os << m.graph.edge(e).name << ',' << format_double(mu.grid[e][i]) << ',' << format_double(mu.samples[e][i])
               << '\n';
}

inline void write_summary(std::ostream& os, const Model& m, const Measure& mu, const ResidualReport& res) {
    os << fmt::format("method {}\nnormalization {}\n", mu.method, format_double(mu.normalization));
    for (VertexId v = 0; v < m.graph.num_vertices(); ++v)
        os << fmt::format("atom {} {}\n", m.graph.vertex_name(v), format_double(mu.atoms[v]));
    for (EdgeId e = 0; e < m.graph.num_edges(); ++e)
        os << fmt::format("current {} {}\n", m.graph.edge(e).name, format_double(mu.current[e]));
    os << fmt::format("residual max {:.3e}\n", res.max());
}

inline Measure compute_measure(const ModelPtr& model, const std::string& method) {
    if (method == "tree") return TreeMeasure(model).invariant_measure();
    if (method == "direct") return assemble_and_solve(model);
    if (method == "reversible") return reversible_invariant(model, vertex_chain(*model));
    throw ConfigError(fmt::format("unknown method '{}'", method));
}

/// sup over grid points of |a - b| / max(|a|, |b|), atoms included.
inline double sup_relative_difference(const Measure& a, const Measure& b) {
    auto rel = [](double x, double y) {
        const double scale = std::max(std::abs(x), std::abs(y));
        return scale == 0.0 ? 0.0 : std::abs(x - y) / scale;
    };
    double d = 0.0;
    for (std::size_t e = 0; e < a.samples.size(); ++e)
        for (std::size_t i = 0; i < a.samples[e].size(); ++i) d = std::max(d, rel(a.samples[e][i], b.samples[e][i]));
    for (std::size_t v = 0; v < a.atoms.size(); ++v) d = std::max(d, rel(a.atoms[v], b.atoms[v]));
    return d;
}

struct Comparison {
    std::vector<std::string> methods;
    std::map<std::string, ResidualReport> residuals;
    std::vector<std::string> skipped;  // method: reason
    struct Pair {
        std::string a, b;
        double difference;
    };
    std::vector<Pair> pairs;
    double tolerance = 1e-6;

    bool ok() const {
        for (const auto& p : pairs)
            if (!(p.difference <= tolerance)) return false;
        for (const auto& [_, r] : residuals)
            if (!(r.max() <= tolerance)) return false;
        return true;
    }
};

inline Comparison compare_methods(const ModelPtr& model) {
    Comparison c;
    c.tolerance = model->numerics.compare_tol;
    std::vector<Measure> measures;
    for (const char* method : {"tree", "direct", "reversible"}) {
        try {
            measures.push_back(compute_measure(model, method));
        } catch (const InapplicableError& e) {
            c.skipped.push_back(fmt::format("{}: {}", method, e.what()));
            continue;
        }
        c.methods.push_back(method);
        c.residuals[method] = stationarity_residuals(*model, measures.back());
    }
    for (std::size_t i = 0; i < measures.size(); ++i)
        for (std::size_t j = i + 1; j < measures.size(); ++j)
            c.pairs.push_back({c.methods[i], c.methods[j], sup_relative_difference(measures[i], measures[j])});
    return c;
}

inline json comparison_json(const Comparison& c) {
    json out;
    out["tolerance"] = c.tolerance;
    out["ok"] = c.ok();
    out["methods"] = c.methods;
    out["skipped"] = c.skipped;
    json pairs = json::array();
    for (const auto& p : c.pairs) pairs.push_back({{"a", p.a}, {"b", p.b}, {"sup_relative_difference", p.difference}});
    out["pairs"] = std::move(pairs);
    json res = json::object();
    for (const auto& [m, r] : c.residuals) res[m] = residuals_json(r);
    out["residuals"] = std::move(res);
    return out;
}

inline void write_comparison(std::ostream& os, const Comparison& c) {
    for (const auto& p : c.pairs) os << fmt::format("{} vs {}: {:.3e}\n", p.a, p.b, p.difference);
    for (const auto& [m, r] : c.residuals) os << fmt::format("{} residual: {:.3e}\n", m, r.max());
    for (const auto& s : c.skipped) os << "skipped " << s << '\n';
    os << fmt::format("tolerance {:.3e}: {}\n", c.tolerance, c.ok() ? "ok" : "exceeded");
}

/// Columns N, then error and ratio per gauge, then the gauge difference.
inline void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows, std::size_t gauges) {
    os << "N";
    for (std::size_t k = 0; k < gauges; ++k) os << ",error_" << k;
    for (std::size_t k = 0; k < gauges; ++k) os << ",ratio_" << k;
    os << ",gauge_difference\n";
    for (const auto& r : rows) {
        os << r.n;
        for (double e : r.error) os << ',' << format_double(e);
        for (const auto& q : r.ratio) os << ',' << (q ? format_double(*q) : std::string());
        os << ',' << format_double(r.gauge_difference) << '\n';
    }
}

}  // namespace metree::cli
