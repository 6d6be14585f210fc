#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "errors.hpp"

namespace metree {

struct GaussRule {
    std::vector<double> nodes;    // on (-1, 1), ascending
    std::vector<double> weights;
};

/// Gauss-Legendre rule of order n by Newton iteration on P_n. Rules are
/// computed once per order and shared.
inline const GaussRule& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;

    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute the derivative at the converged node for the weight.
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

/// Composite Gauss-Legendre with `panels` equal panels of the given order.
/// Also accumulates the integral of |f| into `abs_sum` when non-null.
template <class F>
double composite_gauss(const F& f, double a, double b, int order, int panels, double* abs_sum = nullptr) {
    const GaussRule& rule = gauss_legendre(order);
    const double h = (b - a) / panels;
    double sum = 0.0, asum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        const double half = 0.5 * h;
        double panel = 0.0, apanel = 0.0;
        for (int i = 0; i < order; ++i) {
            const double v = f(mid + half * rule.nodes[i]);
            panel += rule.weights[i] * v;
            apanel += rule.weights[i] * std::abs(v);
        }
        sum += half * panel;
        asum += std::abs(half) * apanel;
    }
    if (abs_sum) *abs_sum = asum;
    return sum;
}

struct QuadratureOptions {
    double tol = 1e-10;
    int order = 16;
    int max_refine = 12;
};

/// Composite Gauss-Legendre with panel doubling until two successive
/// estimates differ by less than tol relative to the integral of |f|.
/// Integrating over [b, a] with b > a returns the negated value.
template <class F>
double integrate(const F& f, double a, double b, const QuadratureOptions& opt = {}) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, opt);

    double scale = 0.0;
    double previous = composite_gauss(f, a, b, opt.order, 1, &scale);
    int panels = 1;
    for (int level = 0; level < opt.max_refine; ++level) {
        panels *= 2;
        const double current = composite_gauss(f, a, b, opt.order, panels, &scale);
        if (std::abs(current - previous) <= opt.tol * std::max(scale, 1e-300)) return current;
        previous = current;
    }
    throw NumericalError(fmt::format("quadrature on [{}, {}] did not converge after {} refinements", a, b,
                                     opt.max_refine));
}

template <class F>
double integrate(const F& f, double a, double b, double tol) {
    QuadratureOptions opt;
    opt.tol = tol;
    return integrate(f, a, b, opt);
}

/// Cached cumulative integral F(x) = int_a^x f on [a, b], tabulated at
/// Chebyshev extreme points and evaluated by barycentric interpolation.
/// The node count doubles until interpolation matches direct quadrature
/// at every inter-node midpoint.
class CumulativeIntegral {
public:
    CumulativeIntegral() = default;

    template <class F>
    CumulativeIntegral(const F& f, double a, double b, const QuadratureOptions& opt = {},
                       double interp_tol = 1e-13, int min_nodes = 32, int max_nodes = 2048)
        : a_(a), b_(b) {
        if (!(b > a)) throw NumericalError("cumulative integral needs a nonempty interval");
        QuadratureOptions local = opt;
        local.tol = std::min(opt.tol, 1e-13);
        for (int n = min_nodes;; n *= 2) {
            tabulate(f, n, local);
            double worst = 0.0, scale = 0.0;
            for (int j = 0; j < n; ++j) {
                const double mid = 0.5 * (x_[j] + x_[j + 1]);
                const double direct = values_[j] + integrate(f, x_[j], mid, local);
                worst = std::max(worst, std::abs((*this)(mid) - direct));
                scale = std::max(scale, std::abs(direct));
            }
            scale = std::max(scale, (b - a) * 1e-300);
            if (worst <= interp_tol * std::max(scale, 1.0)) break;
            if (2 * n > max_nodes)
                throw NumericalError(fmt::format(
                    "cumulative integral on [{}, {}] not resolved with {} Chebyshev nodes (error {:.3g})", a, b, n,
                    worst));
        }
    }

    double operator()(double x) const {
        if (x <= a_) return 0.0;
        if (x >= b_) return values_.back();
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < x_.size(); ++j) {
            const double d = x - x_[j];
            if (d == 0.0) return values_[j];
            const double t = w_[j] / d;
            num += t * values_[j];
            den += t;
        }
        return num / den;
    }

    double total() const { return values_.back(); }
    double lower() const { return a_; }
    double upper() const { return b_; }
    std::size_t size() const { return x_.size(); }
    const std::vector<double>& nodes() const { return x_; }
    const std::vector<double>& values() const { return values_; }

private:
    double a_ = 0.0, b_ = 0.0;
    std::vector<double> x_, values_, w_;

    template <class F>
    void tabulate(const F& f, int n, const QuadratureOptions& opt) {
        x_.assign(n + 1, 0.0);
        w_.assign(n + 1, 0.0);
        values_.assign(n + 1, 0.0);
        const double c = 0.5 * (a_ + b_), r = 0.5 * (b_ - a_);
        for (int j = 0; j <= n; ++j) {
            x_[j] = c - r * std::cos(M_PI * j / n);
            w_[j] = (j % 2 == 0 ? 1.0 : -1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
        }
        x_.front() = a_;
        x_.back() = b_;
        for (int j = 1; j <= n; ++j) values_[j] = values_[j - 1] + integrate(f, x_[j - 1], x_[j], opt);
    }
};

}  // namespace metree
