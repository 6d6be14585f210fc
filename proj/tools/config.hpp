#pragma once

// JSON model configuration: loading, validation with located diagnostics,
// and construction of the library Model.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "metree/discrete.hpp"
#include "metree/errors.hpp"
#include "metree/expression.hpp"
#include "metree/profile.hpp"

namespace metree::cli {

using nlohmann::json;

struct Diagnostic {
    std::string location;  // JSON pointer into the config document
    std::string kind;
    std::string message;
};

/// Invalid configuration; carries every diagnostic found.
class InvalidConfig : public ConfigError {
public:
    explicit InvalidConfig(std::vector<Diagnostic> diags)
        : ConfigError(summary(diags)), diagnostics_(std::move(diags)) {}
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;

    static std::string summary(const std::vector<Diagnostic>& d) {
        if (d.empty()) return "invalid configuration";
        std::string s = fmt::format("{}: {}", d.front().location, d.front().message);
        if (d.size() > 1) s += fmt::format(" (and {} more)", d.size() - 1);
        return s;
    }
};

struct EdgeConfig {
    std::string id;
    double length = 1.0;
    std::string tail, head;
    std::string b = "0", sigma = "1";
};

struct ScalingConfig {
    std::vector<std::string> gauges;  // fields F; empty means F = s only
    double c = 1.0;
    std::vector<int> meshes{100, 200, 400, 800};
};

struct ModelConfig {
    GraphSpec graph;
    std::vector<EdgeConfig> edges;
    json vertices = json::object();
    Numerics numerics;
    ScalingConfig scaling;
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw InvalidConfig({{"", "parse", fmt::format("malformed JSON (byte {}): {}", e.byte, e.what())}});
    }
}

namespace detail {

class Reader {
public:
    std::vector<Diagnostic> diags;

    void fail(const std::string& where, const std::string& kind, const std::string& msg) {
        diags.push_back({where, kind, msg});
    }

    const json* member(const json& obj, const std::string& key, const std::string& where, bool required) {
        if (!obj.is_object()) {
            fail(where, "config", "expected an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(where + "/" + key, "config", "missing required field");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const json& v, const std::string& where) {
        if (!v.is_number()) {
            fail(where, "config", "expected a number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<std::string> string(const json& v, const std::string& where) {
        if (!v.is_string()) {
            fail(where, "config", "expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<std::string> expression(const json& v, const std::string& where) {
        std::optional<std::string> text;
        if (v.is_number()) text = fmt::format("{:.17g}", v.get<double>());
        else text = string(v, where);
        if (!text) return std::nullopt;
        try {
            Expression::parse(*text);
        } catch (const ParseError& e) {
            fail(where, e.kind(), e.what());
            return std::nullopt;
        }
        return text;
    }
};

}  // namespace detail

/// Structural parse. Throws InvalidConfig listing every problem found.
inline ModelConfig parse_config(const json& doc) {
    detail::Reader r;
    ModelConfig cfg;
    const json* graph = r.member(doc, "graph", "", true);
    if (graph) {
        if (const json* vs = r.member(*graph, "vertices", "/graph", true)) {
            if (!vs->is_array()) r.fail("/graph/vertices", "config", "expected an array of vertex names");
            else
                for (std::size_t i = 0; i < vs->size(); ++i)
                    if (auto name = r.string((*vs)[i], fmt::format("/graph/vertices/{}", i)))
                        cfg.graph.vertices.push_back(*name);
        }
        if (const json* es = r.member(*graph, "edges", "/graph", true)) {
            if (!es->is_array()) r.fail("/graph/edges", "config", "expected an array of edges");
            else
                for (std::size_t i = 0; i < es->size(); ++i) {
                    const std::string where = fmt::format("/graph/edges/{}", i);
                    const json& e = (*es)[i];
                    EdgeConfig ec;
                    bool ok = true;
                    auto take_string = [&](const char* key, std::string& dst) {
                        const json* v = r.member(e, key, where, true);
                        auto s = v ? r.string(*v, where + "/" + key) : std::nullopt;
                        if (s) dst = *s;
                        else ok = false;
                    };
                    take_string("id", ec.id);
                    take_string("tail", ec.tail);
                    take_string("head", ec.head);
                    if (const json* v = r.member(e, "length", where, true)) {
                        if (auto x = r.number(*v, where + "/length")) ec.length = *x;
                        else ok = false;
                    } else {
                        ok = false;
                    }
                    for (auto [key, dst] : {std::pair{"b", &ec.b}, std::pair{"sigma", &ec.sigma}}) {
                        if (const json* v = r.member(e, key, where, false)) {
                            if (auto t = r.expression(*v, where + "/" + key)) *dst = *t;
                            else ok = false;
                        }
                    }
                    if (ok) {
                        cfg.edges.push_back(ec);
                        cfg.graph.edges.push_back({ec.id, ec.length, ec.tail, ec.head});
                    }
                }
        }
    }
    if (const json* vs = r.member(doc, "vertices", "", false)) {
        if (!vs->is_object()) r.fail("/vertices", "config", "expected an object keyed by vertex name");
        else cfg.vertices = *vs;
    }
    if (const json* n = r.member(doc, "numerics", "", false)) {
        auto num = [&](const char* key, auto& dst) {
            if (const json* v = r.member(*n, key, "/numerics", false))
                if (auto x = r.number(*v, fmt::format("/numerics/{}", key))) dst = static_cast<std::decay_t<decltype(dst)>>(*x);
        };
        num("tol", cfg.numerics.tol);
        num("quad_order", cfg.numerics.quad_order);
        num("max_refine", cfg.numerics.max_refine);
        num("grid", cfg.numerics.grid);
        num("compare_tol", cfg.numerics.compare_tol);
        if (!(cfg.numerics.tol > 0.0)) r.fail("/numerics/tol", "config", "must be positive");
        if (cfg.numerics.quad_order < 2 || cfg.numerics.quad_order > 64)
            r.fail("/numerics/quad_order", "config", "must lie in [2, 64]");
        if (cfg.numerics.max_refine < 1) r.fail("/numerics/max_refine", "config", "must be at least 1");
        if (cfg.numerics.grid < 2) r.fail("/numerics/grid", "config", "must be at least 2");
        if (!(cfg.numerics.compare_tol > 0.0)) r.fail("/numerics/compare_tol", "config", "must be positive");
    }
    if (const json* s = r.member(doc, "ring_scaling", "", false)) {
        if (const json* g = r.member(*s, "gauges", "/ring_scaling", false)) {
            if (!g->is_array()) r.fail("/ring_scaling/gauges", "config", "expected an array of expressions");
            else
                for (std::size_t i = 0; i < g->size(); ++i)
                    if (auto t = r.expression((*g)[i], fmt::format("/ring_scaling/gauges/{}", i)))
                        cfg.scaling.gauges.push_back(*t);
        }
        if (const json* c = r.member(*s, "c", "/ring_scaling", false))
            if (auto x = r.number(*c, "/ring_scaling/c")) {
                cfg.scaling.c = *x;
                if (!(*x > 0.0)) r.fail("/ring_scaling/c", "config", "must be positive");
            }
        if (const json* ns = r.member(*s, "N", "/ring_scaling", false)) {
            if (!ns->is_array()) {
                r.fail("/ring_scaling/N", "config", "expected an array of integers");
            } else {
                cfg.scaling.meshes.clear();
                for (std::size_t i = 0; i < ns->size(); ++i) {
                    const auto& v = (*ns)[i];
                    if (!v.is_number_integer() || v.get<long long>() < 3)
                        r.fail(fmt::format("/ring_scaling/N/{}", i), "config", "expected an integer >= 3");
                    else cfg.scaling.meshes.push_back(v.get<int>());
                }
            }
        }
    }
    if (!r.diags.empty()) throw InvalidConfig(std::move(r.diags));
    return cfg;
}

/// Builds the graph, the coefficient profiles and the vertex parameters,
/// collecting every violated constraint.
inline ModelPtr build_model(const ModelConfig& cfg) {
    std::vector<Diagnostic> diags;
    MetricGraph g;
    try {
        g = MetricGraph::build(cfg.graph);
    } catch (const Error& e) {
        throw InvalidConfig({{"/graph", e.kind(), e.what()}});
    }

    auto params = VertexParams::uniform(g);
    if (cfg.vertices.is_object()) {
        for (auto it = cfg.vertices.begin(); it != cfg.vertices.end(); ++it) {
            const std::string where = "/vertices/" + it.key();
            const auto v = g.find_vertex(it.key());
            if (!v) {
                diags.push_back({where, "config", fmt::format("unknown vertex '{}'", it.key())});
                continue;
            }
            const json& vj = it.value();
            if (!vj.is_object()) {
                diags.push_back({where, "config", "expected an object"});
                continue;
            }
            for (auto f = vj.begin(); f != vj.end(); ++f) {
                const std::string fw = where + "/" + f.key();
                if (f.key() == "alpha" || f.key() == "K") {
                    if (!f.value().is_number()) {
                        diags.push_back({fw, "config", "expected a number"});
                        continue;
                    }
                    (f.key() == "alpha" ? params.alpha : params.K)[*v] = f.value().get<double>();
                } else if (f.key() == "alpha_edges") {
                    if (!f.value().is_object()) {
                        diags.push_back({fw, "config", "expected an object keyed by edge id"});
                        continue;
                    }
                    for (auto a = f.value().begin(); a != f.value().end(); ++a) {
                        const std::string aw = fw + "/" + a.key();
                        if (!a.value().is_number()) {
                            diags.push_back({aw, "config", "expected a number"});
                            continue;
                        }
                        std::string edge_name = a.key();
                        std::optional<Side> side;
                        if (auto at = edge_name.rfind('@'); at != std::string::npos) {
                            const std::string suffix = edge_name.substr(at + 1);
                            edge_name.resize(at);
                            if (suffix == "tail") side = Side::tail;
                            else if (suffix == "head") side = Side::head;
                            else {
                                diags.push_back({aw, "config", "side suffix must be '@tail' or '@head'"});
                                continue;
                            }
                        }
                        const auto e = g.find_edge(edge_name);
                        if (!e) {
                            diags.push_back({aw, "config", fmt::format("unknown edge '{}'", edge_name)});
                            continue;
                        }
                        bool matched = false;
                        for (const auto& germ : g.germs(*v))
                            if (germ.edge == *e && (!side || germ.side == *side)) {
                                params.germ_alpha(germ) = a.value().get<double>();
                                matched = true;
                            }
                        if (!matched)
                            diags.push_back({aw, "config",
                                             fmt::format("edge '{}' is not attached to vertex '{}' at that side",
                                                         edge_name, it.key())});
                    }
                } else {
                    diags.push_back({fw, "config", fmt::format("unknown field '{}'", f.key())});
                }
            }
        }
    }
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        try {
            params.validate_vertex(g, v);
        } catch (const Error& e) {
            diags.push_back({"/vertices/" + g.vertex_name(v), e.kind(), e.what()});
        }
    }

    std::vector<std::pair<Expression, Expression>> coefs;
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& ec = cfg.edges[e];
        const std::string where = fmt::format("/graph/edges/{}", e);
        auto b = Expression::parse(ec.b);
        auto sigma = Expression::parse(ec.sigma);
        try {
            EdgeProfile check(ec.length, b, sigma, cfg.numerics, ec.id);
        } catch (const Error& err) {
            diags.push_back({where + "/sigma", err.kind(), err.what()});
        }
        coefs.emplace_back(std::move(b), std::move(sigma));
    }
    if (!diags.empty()) throw InvalidConfig(std::move(diags));
    return make_model(std::move(g), coefs, std::move(params), cfg.numerics);
}

inline ModelPtr load_model(const std::string& path) { return build_model(parse_config(read_json_file(path))); }

/// Chain description: {"states": [names] | n, "rates": [{"from", "to", "rate"}]}.
struct ChainConfig {
    std::vector<std::string> states;
    FiniteChain chain{0};
};

inline ChainConfig parse_chain(const json& doc) {
    detail::Reader r;
    ChainConfig out;
    const json* st = r.member(doc, "states", "", true);
    if (st) {
        if (st->is_number_integer() && st->get<long long>() > 0) {
            for (long long i = 0; i < st->get<long long>(); ++i) out.states.push_back(std::to_string(i));
        } else if (st->is_array()) {
            for (std::size_t i = 0; i < st->size(); ++i)
                if (auto s = r.string((*st)[i], fmt::format("/states/{}", i))) out.states.push_back(*s);
        } else {
            r.fail("/states", "config", "expected a positive integer or an array of names");
        }
    }
    auto state_index = [&](const json& v, const std::string& where) -> std::optional<std::size_t> {
        if (v.is_number_integer()) {
            const auto i = v.get<long long>();
            if (i >= 0 && static_cast<std::size_t>(i) < out.states.size()) return static_cast<std::size_t>(i);
        } else if (v.is_string()) {
            for (std::size_t i = 0; i < out.states.size(); ++i)
                if (out.states[i] == v.get<std::string>()) return i;
        }
        r.fail(where, "config", "unknown state");
        return std::nullopt;
    };
    out.chain = FiniteChain(out.states.size());
    if (const json* rs = r.member(doc, "rates", "", true)) {
        if (!rs->is_array()) r.fail("/rates", "config", "expected an array");
        else
            for (std::size_t i = 0; i < rs->size(); ++i) {
                const std::string where = fmt::format("/rates/{}", i);
                const json& t = (*rs)[i];
                const json* from = r.member(t, "from", where, true);
                const json* to = r.member(t, "to", where, true);
                const json* rate = r.member(t, "rate", where, true);
                if (!from || !to || !rate) continue;
                auto a = state_index(*from, where + "/from");
                auto b = state_index(*to, where + "/to");
                auto x = r.number(*rate, where + "/rate");
                if (!a || !b || !x) continue;
                try {
                    out.chain.add_rate(*a, *b, *x);
                } catch (const Error& e) {
                    r.fail(where + "/rate", e.kind(), e.what());
                }
            }
    }
    if (r.diags.empty() && !out.chain.strongly_connected())
        r.fail("/rates", "config", "transition graph is not strongly connected");
    if (!r.diags.empty()) throw InvalidConfig(std::move(r.diags));
    return out;
}

}  // namespace metree::cli
