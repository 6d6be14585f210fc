#pragma once

// Convergence of the diffusively rescaled ring walks to the ring diffusion.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "discrete.hpp"
#include "profile.hpp"
#include "treemeasure.hpp"

namespace metree {

/// Unit ring: one vertex `o`, one loop `ring` of length 1, alpha_v = 0 and
/// unit germ weights.
inline ModelPtr make_ring_model(const Expression& b, const Expression& sigma, const Numerics& numerics = {}) {
    GraphSpec spec;
    spec.vertices = {"o"};
    spec.edges = {{"ring", 1.0, "o", "o"}};
    auto g = MetricGraph::build(spec);
    auto params = VertexParams::uniform(g);
    return make_model(std::move(g), {{b, sigma}}, std::move(params), numerics);
}

/// sup over the sites i/N of |N mu^N(i/N) - mu(i/N)|.
inline double scaling_error(const RingClosedForm& limit, const MicroTriple& mt, int n_sites,
                            const QuadratureOptions& opt = {}) {
    const auto dens = ring_walk_density(mt, n_sites, opt);
    double err = 0.0;
    for (int i = 0; i < n_sites; ++i)
        err = std::max(err, std::abs(dens[i] - limit(static_cast<double>(i) / n_sites)));
    return err;
}

inline double scaling_error(const Expression& b, const Expression& sigma, const Expression& F, int n_sites,
                            const Numerics& numerics = {}) {
    const auto model = make_ring_model(b, sigma, numerics);
    const RingClosedForm limit(model);
    return scaling_error(limit, micro_from_macro(b, sigma, F, 1.0, numerics.quadrature()), n_sites,
                         numerics.quadrature());
}

struct ScalingRow {
    int n = 0;
    std::vector<double> error;                 // one per gauge
    std::vector<std::optional<double>> ratio;  // previous error / this error
    double gauge_difference = 0.0;             // sup |N mu^N_F - N mu^N_G| over gauge pairs
};

/// Error table over the mesh counts for each field F (gauge).
inline std::vector<ScalingRow> scaling_study(const Expression& b, const Expression& sigma,
                                             const std::vector<Expression>& gauges, const std::vector<int>& meshes,
                                             double c = 1.0, const Numerics& numerics = {}) {
    const auto opt = numerics.quadrature();
    const auto model = make_ring_model(b, sigma, numerics);
    const RingClosedForm limit(model);
    std::vector<MicroTriple> micro;
    for (const auto& F : gauges) micro.push_back(micro_from_macro(b, sigma, F, c, opt));

    std::vector<ScalingRow> rows;
    for (int n : meshes) {
        ScalingRow row;
        row.n = n;
        std::vector<std::vector<double>> dens;
        for (const auto& mt : micro) {
            dens.push_back(ring_walk_density(mt, n, opt));
            double err = 0.0;
            for (int i = 0; i < n; ++i)
                err = std::max(err, std::abs(dens.back()[i] - limit(static_cast<double>(i) / n)));
            row.error.push_back(err);
        }
        for (std::size_t k = 0; k < dens.size(); ++k) {
            if (rows.empty() || !(row.error[k] > 0.0)) row.ratio.push_back(std::nullopt);
            else row.ratio.push_back(rows.back().error[k] / row.error[k]);
            for (std::size_t l = k + 1; l < dens.size(); ++l)
                for (int i = 0; i < n; ++i)
                    row.gauge_difference = std::max(row.gauge_difference, std::abs(dens[k][i] - dens[l][i]));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace metree
