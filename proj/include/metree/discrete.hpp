#pragma once

// Finite continuous-time Markov chains: stationary law by arborescence
// enumeration and by the balance equations, and the diffusive random walks
// on the discrete ring whose invariant measures approximate the ring
// diffusion.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "errors.hpp"
#include "expression.hpp"
#include "quadrature.hpp"

namespace metree {

/// Chain on states 0..n-1 with positive rates r(x, y), x != y.
class FiniteChain {
public:
    explicit FiniteChain(std::size_t n) : n_(n), rates_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }

    /// Adds to r(from, to); parallel transitions accumulate. Self-transitions
    /// do not affect the law and are dropped.
    void add_rate(std::size_t from, std::size_t to, double rate) {
        if (from >= n_ || to >= n_) throw ConfigError("transition references an unknown state");
        if (!(rate > 0.0) || !std::isfinite(rate))
            throw ConfigError(fmt::format("rate {} -> {} must be positive and finite", from, to));
        if (from == to) return;
        rates_[from * n_ + to] += rate;
    }

    double rate(std::size_t from, std::size_t to) const { return rates_[from * n_ + to]; }

    bool strongly_connected() const {
        auto reach_all = [&](bool forward) {
            std::vector<bool> seen(n_, false);
            std::vector<std::size_t> stack{0};
            seen[0] = true;
            std::size_t count = 1;
            while (!stack.empty()) {
                const std::size_t v = stack.back();
                stack.pop_back();
                for (std::size_t w = 0; w < n_; ++w) {
                    const double r = forward ? rate(v, w) : rate(w, v);
                    if (r > 0.0 && !seen[w]) {
                        seen[w] = true;
                        ++count;
                        stack.push_back(w);
                    }
                }
            }
            return count == n_;
        };
        return n_ > 0 && reach_all(true) && reach_all(false);
    }

private:
    std::size_t n_;
    std::vector<double> rates_;
};

inline void require_irreducible(const FiniteChain& c) {
    if (!c.strongly_connected()) throw ConfigError("transition graph is not strongly connected");
}

/// Calls visit(successor) for every arborescence directed toward `root`,
/// where successor[v] is the state v jumps to (root maps to itself).
template <class Visit>
void for_each_arborescence(const FiniteChain& c, std::size_t root, Visit&& visit) {
    const std::size_t n = c.size();
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t w = 0; w < n; ++w)
            if (c.rate(v, w) > 0.0) out[v].push_back(w);

    std::vector<std::size_t> succ(n, n);
    succ[root] = root;
    // Choosing successors in state order; a choice is kept only if the
    // pointer chain from v does not return to v.
    auto closes_cycle = [&](std::size_t v) {
        std::size_t u = succ[v];
        for (std::size_t steps = 0; steps <= n; ++steps) {
            if (u == root || u == n) return false;
            if (u == v) return true;
            u = succ[u];
        }
        return true;
    };
    auto recurse = [&](auto&& self, std::size_t v) -> void {
        if (v == n) {
            visit(static_cast<const std::vector<std::size_t>&>(succ));
            return;
        }
        if (v == root) {
            self(self, v + 1);
            return;
        }
        for (std::size_t w : out[v]) {
            succ[v] = w;
            if (!closes_cycle(v)) self(self, v + 1);
        }
        succ[v] = n;
    };
    recurse(recurse, 0);
}

/// Stationary law as the normalized sum of arborescence weights
/// prod_v r(v, succ(v)) over arborescences toward each state.
inline std::vector<double> mctt_stationary(const FiniteChain& c) {
    require_irreducible(c);
    const std::size_t n = c.size();
    std::vector<double> mu(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        for_each_arborescence(c, x, [&](const std::vector<std::size_t>& succ) {
            double w = 1.0;
            for (std::size_t v = 0; v < n; ++v)
                if (v != x) w *= c.rate(v, succ[v]);
            mu[x] += w;
        });
    }
    double z = 0.0;
    for (double m : mu) z += m;
    for (double& m : mu) m /= z;
    return mu;
}

/// Stationary law from pi(x) sum_y r(x,y) = sum_y pi(y) r(y,x), with the
/// last balance row replaced by the normalization.
inline std::vector<double> stationary_linear(const FiniteChain& c) {
    require_irreducible(c);
    const auto n = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) {
            if (x == y) continue;
            const double r = c.rate(x, y);
            a(x, x) -= r;  // outflow from x
            a(y, x) += r;  // inflow to y
        }
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::VectorXd pi = lu.solve(rhs);
    if (!pi.allFinite()) throw NumericalError("balance equations are singular");
    return {pi.data(), pi.data() + n};
}

/// Microscopic parametrization of a reversible-plus-field walk on the unit
/// ring: site weights alpha, symmetric bond weights Q, field F.
struct MicroTriple {
    std::function<double(double)> alpha;
    std::function<double(double)> Q;
    Expression F;
    double c = 1.0;
};

/// The weights reproducing (b, sigma) for the field F:
///   Q = c exp(phi),  alpha = sigma^2 / (2c) exp(-phi),  phi(x) = int_0^x 2 (s - F).
/// On the ring F must carry the same total as s.
inline MicroTriple micro_from_macro(const Expression& b, const Expression& sigma, const Expression& F, double c = 1.0,
                                    const QuadratureOptions& opt = {}, bool ring = true) {
    if (!(c > 0.0)) throw ConfigError("the gauge constant c must be positive");
    auto s = [b, sigma](double x) {
        const double sg = sigma(x);
        return b(x) / (sg * sg);
    };
    auto phi = std::make_shared<CumulativeIntegral>([&](double x) { return 2.0 * (s(x) - F(x)); }, 0.0, 1.0, opt);
    if (ring) {
        const double scale = integrate([&](double x) { return std::abs(s(x)) + std::abs(F(x)); }, 0.0, 1.0, opt);
        if (std::abs(phi->total()) > 1e-9 * std::max(scale, 1.0))
            throw DomainError(fmt::format("field total differs from the total of s by {:.3g}", 0.5 * phi->total()));
    }
    MicroTriple mt;
    mt.c = c;
    mt.F = F;
    mt.Q = [phi, c](double x) { return c * std::exp((*phi)(x)); };
    mt.alpha = [phi, c, sigma](double x) {
        const double sg = sigma(x);
        return sg * sg / (2.0 * c) * std::exp(-(*phi)(x));
    };
    return mt;
}

/// Nearest-neighbour walk on N sites i/N of the unit ring with rates
///   N^2 alpha(x) Q((x+y)/2) exp(F_N(x,y)),  F_N(x,y) = int_x^y F.
inline FiniteChain ring_walk(const MicroTriple& mt, int n_sites, const QuadratureOptions& opt = {}) {
    if (n_sites < 3) throw ConfigError("ring walk needs at least 3 sites");
    FiniteChain chain(n_sites);
    const double h = 1.0 / n_sites;
    const double scale = static_cast<double>(n_sites) * n_sites;
    for (int i = 0; i < n_sites; ++i) {
        const int j = (i + 1) % n_sites;
        const double x = i * h;
        const double q = mt.Q(x + 0.5 * h);
        const double f = integrate([&](double z) { return mt.F(z); }, x, x + h, opt);
        chain.add_rate(i, j, scale * mt.alpha(x) * q * std::exp(f));
        chain.add_rate(j, i, scale * mt.alpha(j * h) * q * std::exp(-f));
    }
    return chain;
}

/// N * mu^N at the sites, the walk's stationary law as a density.
inline std::vector<double> ring_walk_density(const MicroTriple& mt, int n_sites, const QuadratureOptions& opt = {}) {
    auto pi = stationary_linear(ring_walk(mt, n_sites, opt));
    for (double& p : pi) p *= n_sites;
    return pi;
}

}  // namespace metree
