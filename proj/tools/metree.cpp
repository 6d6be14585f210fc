// metree: invariant measures of diffusions on metric graphs.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "config.hpp"
#include "metree/metree.hpp"
#include "report.hpp"

namespace {

using namespace metree;
using namespace metree::cli;

constexpr int exit_failure_tolerance = 1;
constexpr int exit_error = 2;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("metree");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("METREE_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

json error_json(const std::exception& e) {
    json err;
    const auto* me = dynamic_cast<const Error*>(&e);
    err["kind"] = me ? me->kind() : "internal";
    err["message"] = e.what();
    if (const auto* ic = dynamic_cast<const InvalidConfig*>(&e)) {
        json diags = json::array();
        for (const auto& d : ic->diagnostics())
            diags.push_back({{"location", d.location}, {"kind", d.kind}, {"message", d.message}});
        err["diagnostics"] = std::move(diags);
    }
    return {{"error", err}};
}

void report_error(const std::exception& e, bool as_json) {
    if (as_json) {
        std::cout << error_json(e).dump(2) << '\n';
        return;
    }
    if (const auto* ic = dynamic_cast<const InvalidConfig*>(&e)) {
        for (const auto& d : ic->diagnostics())
            std::cerr << fmt::format("error: {}: {}\n", d.location.empty() ? "/" : d.location, d.message);
        return;
    }
    std::cerr << "error: " << e.what() << '\n';
}

/// Runs `body`, mapping exceptions to an error report and exit code 2.
template <class Body>
int guarded(bool as_json, Body&& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        spdlog::debug("command failed: {}", e.what());
        report_error(e, as_json);
        return exit_error;
    }
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("cannot write '{}'", out_path));
    f << text;
}

int cmd_validate(const std::string& path, const std::string& format) {
    const bool as_json = format == "json";
    return guarded(as_json, [&] {
        const auto model = load_model(path);
        const auto& g = model->graph;
        if (as_json) {
            std::cout << json{{"valid", true},
                              {"vertices", g.num_vertices()},
                              {"edges", g.num_edges()},
                              {"cut_space_dimension", g.cut_space_dimension()}}
                             .dump(2)
                      << '\n';
        } else {
            std::cout << fmt::format("valid: {} vertices, {} edges, cut space dimension {}\n", g.num_vertices(),
                                     g.num_edges(), g.cut_space_dimension());
        }
        return 0;
    });
}

int cmd_invariant(const std::string& path, const std::string& method, const std::string& out,
                  const std::string& format) {
    const bool as_json = format == "json";
    return guarded(as_json, [&] {
        const auto model = load_model(path);
        spdlog::info("computing the {} measure on {} edges", method, model->graph.num_edges());
        const Measure mu = compute_measure(model, method);
        const auto res = stationarity_residuals(*model, mu);
        std::ostringstream body;
        if (as_json) {
            body << measure_json(*model, mu, res).dump(2) << '\n';
            emit(out, body.str());
        } else {
            write_density_csv(body, *model, mu);
            emit(out, body.str());
            std::ostringstream summary;
            write_summary(summary, *model, mu, res);
            if (out.empty() || out == "-") std::cerr << summary.str();
            else std::cout << summary.str();
        }
        return 0;
    });
}

int cmd_compare(const std::string& path, const std::string& format) {
    const bool as_json = format == "json";
    return guarded(as_json, [&] {
        const auto model = load_model(path);
        const auto cmp = compare_methods(model);
        if (as_json) std::cout << comparison_json(cmp).dump(2) << '\n';
        else write_comparison(std::cout, cmp);
        return cmp.ok() ? 0 : exit_failure_tolerance;
    });
}

int cmd_ring_scaling(const std::string& path, std::vector<int> meshes, const std::string& format) {
    const bool as_json = format == "json";
    return guarded(as_json, [&] {
        const json doc = read_json_file(path);
        const ModelConfig cfg = parse_config(doc);
        const auto model = build_model(cfg);
        const auto& g = model->graph;
        if (g.num_vertices() != 1 || g.num_edges() != 1 || !g.edge(0).is_loop() || g.edge(0).length != 1.0)
            throw InapplicableError("ring-scaling needs a single loop of length 1 on a single vertex");
        const auto& ec = cfg.edges.front();
        std::vector<std::string> gauge_text = cfg.scaling.gauges;
        if (gauge_text.empty()) gauge_text.push_back(fmt::format("({})/(({})^2)", ec.b, ec.sigma));
        std::vector<Expression> gauges;
        for (const auto& t : gauge_text) gauges.push_back(Expression::parse(t));
        if (meshes.empty()) meshes = cfg.scaling.meshes;
        for (int n : meshes)
            if (n < 3) throw ConfigError(fmt::format("mesh count {} is below 3", n));
        const auto rows = scaling_study(Expression::parse(ec.b), Expression::parse(ec.sigma), gauges, meshes,
                                        cfg.scaling.c, cfg.numerics);
        if (as_json) {
            json table = json::array();
            for (const auto& r : rows) {
                json ratios = json::array();
                for (const auto& q : r.ratio) ratios.push_back(q ? json(*q) : json(nullptr));
                table.push_back({{"N", r.n}, {"error", r.error}, {"ratio", ratios}, {"gauge_difference", r.gauge_difference}});
            }
            std::cout << json{{"gauges", gauge_text}, {"rows", table}}.dump(2) << '\n';
        } else {
            write_scaling_csv(std::cout, rows, gauges.size());
        }
        return 0;
    });
}

int cmd_mctt(const std::string& path, const std::string& format) {
    const bool as_json = format == "json";
    return guarded(as_json, [&] {
        const auto cc = parse_chain(read_json_file(path));
        if (cc.states.size() > 10)
            throw InapplicableError(fmt::format("arborescence enumeration is limited to 10 states (got {})",
                                                cc.states.size()));
        const auto tree = mctt_stationary(cc.chain);
        const auto linear = stationary_linear(cc.chain);
        double diff = 0.0;
        for (std::size_t i = 0; i < tree.size(); ++i) diff = std::max(diff, std::abs(tree[i] - linear[i]));
        if (as_json) {
            std::cout << json{{"states", cc.states}, {"mctt", tree}, {"linear", linear}, {"sup_difference", diff}}.dump(2)
                      << '\n';
        } else {
            std::cout << "state,mctt,linear\n";
            for (std::size_t i = 0; i < tree.size(); ++i)
                std::cout << cc.states[i] << ',' << format_double(tree[i]) << ',' << format_double(linear[i]) << '\n';
            std::cerr << fmt::format("sup difference {:.3e}\n", diff);
        }
        return 0;
    });
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Invariant measures of diffusions on metric graphs"};
    app.require_subcommand(1);

    std::string config, format, method = "tree", out;
    std::vector<int> meshes;

    auto* validate = app.add_subcommand("validate", "Check a model configuration");
    validate->add_option("config", config, "Model configuration (JSON)")->required();
    validate->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}))->default_val("text");

    auto* invariant = app.add_subcommand("invariant", "Compute the invariant measure");
    invariant->add_option("config", config, "Model configuration (JSON)")->required();
    invariant->add_option("--method", method, "tree, direct or reversible")
        ->check(CLI::IsMember({"tree", "direct", "reversible"}))
        ->default_val("tree");
    invariant->add_option("--out", out, "Output file (default stdout)");
    invariant->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->default_val("csv");

    auto* compare = app.add_subcommand("compare", "Cross-check every applicable method");
    compare->add_option("config", config, "Model configuration (JSON)")->required();
    compare->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}))->default_val("text");

    auto* scaling = app.add_subcommand("ring-scaling", "Convergence of ring walks to the ring diffusion");
    scaling->add_option("config", config, "Ring configuration (JSON)")->required();
    scaling->add_option("--N", meshes, "Comma separated mesh counts")->delimiter(',');
    scaling->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->default_val("csv");

    auto* mctt = app.add_subcommand("mctt", "Stationary law of a finite chain");
    mctt->add_option("chain", config, "Chain description (JSON)")->required();
    mctt->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}))->default_val("text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : exit_error;
    }

    if (*validate) return cmd_validate(config, format);
    if (*invariant) return cmd_invariant(config, method, out, format);
    if (*compare) return cmd_compare(config, format);
    if (*scaling) return cmd_ring_scaling(config, meshes, format);
    return cmd_mctt(config, format);
}
