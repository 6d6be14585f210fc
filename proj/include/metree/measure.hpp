#pragma once

#include <functional>
#include <string>
#include <vector>

#include "graph.hpp"

namespace metree {

/// Probability measure on a metric graph with vertex atoms and edge
/// densities. Currents are constant per edge, positive along the canonical
/// orientation.
struct Measure {
    std::string method;
    std::vector<double> atoms;                            // per vertex
    std::vector<std::function<double(double)>> density;   // per edge, valid on [0, l_e]
    std::vector<std::vector<double>> grid;                // per edge sample coordinates
    std::vector<std::vector<double>> samples;             // density at `grid`
    std::vector<double> current;                          // per edge
    double normalization = 1.0;                           // Z dividing the unnormalized construction

    double operator()(Point p) const { return density.at(p.edge)(p.x); }
};

inline std::vector<double> uniform_grid(double length, int points) {
    std::vector<double> xs(points);
    for (int i = 0; i < points; ++i) xs[i] = points == 1 ? 0.5 * length : length * i / (points - 1);
    xs.back() = length;
    return xs;
}

/// Fills `grid` and `samples` from the density evaluators.
inline void sample_measure(Measure& m, const MetricGraph& g, int points) {
    m.grid.assign(g.num_edges(), {});
    m.samples.assign(g.num_edges(), {});
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        m.grid[e] = uniform_grid(g.edge(e).length, points);
        for (double x : m.grid[e]) m.samples[e].push_back(m.density[e](x));
    }
}

}  // namespace metree
