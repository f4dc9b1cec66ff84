#ifndef MAGLOC_QUADRATURE_HPP
#define MAGLOC_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "core.hpp"

namespace magloc::quad {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule on [-1,1] by Newton iteration on P_n.
inline Rule gauss_legendre(int n) {
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) { p1 = x; p0 = 1.0; }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

template <class F>
double gauss_legendre_integrate(F&& f, double a, double b, int n) {
    static thread_local std::vector<Rule> cache(65);
    if (n < 1 || n > 64) throw DomainError("gauss_legendre_integrate: n out of range");
    if (cache[n].nodes.empty()) cache[n] = gauss_legendre(n);
    const Rule& r = cache[n];
    double c = 0.5 * (a + b), hw = 0.5 * (b - a), s = 0.0;
    for (int i = 0; i < n; ++i) s += r.weights[i] * f(c + hw * r.nodes[i]);
    return s * hw;
}

// Adaptive Gauss-Kronrod 7-15 on [a,b]; throws with the segment when the error estimate stays above tol.
template <class F>
double adaptive_gk(F&& f, double a, double b, double tol = 1e-10) {
    if (a == b) return 0.0;
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 20, tol, &err);
    double scale = std::max(1.0, std::abs(v));
    if (!std::isfinite(v) || err > tol * scale * 10.0)
        throw QuadratureError("adaptive Gauss-Kronrod did not converge", a, b);
    return v;
}

struct DEResult {
    cplx value;
    double rel_change;
    int level;
};

// Trapezoid sums of g on [u_lo, u_hi] with step halving; g already contains the transform weight.
template <class G>
DEResult de_trapezoid(G&& g, double u_lo, double u_hi, double tol, int max_level) {
    double h = 0.5;
    cplx sum = 0.0;
    for (long j = static_cast<long>(std::ceil(u_lo / h)); j * h <= u_hi; ++j) sum += g(j * h);
    cplx prev = sum * h;
    double rel = 1.0;
    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        cplx add = 0.0;
        long j0 = static_cast<long>(std::ceil(u_lo / h));
        if (j0 % 2 == 0) ++j0;
        for (long j = j0; j * h <= u_hi; j += 2) add += g(j * h);
        sum += add;
        cplx cur = sum * h;
        double mag = std::abs(cur);
        rel = std::abs(cur - prev) / (mag > 0.0 ? mag : 1.0);
        if (level >= 3 && rel < tol) return {cur, rel, level};
        prev = cur;
    }
    return {prev, rel, max_level};
}

// Largest |u| on one side at which the weighted integrand is still relevant.
template <class G>
double de_extent(G&& g, double direction, double umax) {
    double peak = 0.0, u = 0.0, last_relevant = 0.0;
    for (int i = 0; i <= static_cast<int>(umax / 0.0625); ++i, u += 0.0625) {
        double m = std::abs(g(direction * u));
        if (!std::isfinite(m)) break;
        peak = std::max(peak, m);
        if (m > 1e-18 * peak) last_relevant = u;
        else if (u > last_relevant + 0.5) break;
    }
    return last_relevant + 0.25;
}

// Integral over [0,1] of f(t) with integrable endpoint singularities (tanh-sinh).
// f receives t computed without cancellation near 0.
template <class F>
DEResult tanh_sinh_01(F&& f, double tol = 1e-12, int max_level = 9) {
    auto g = [&](double u) -> cplx {
        double s = 0.5 * pi * std::sinh(u);
        double e = std::exp(-2.0 * std::abs(s));
        double small = e / (1.0 + e);
        double t = u < 0.0 ? small : 1.0 - small;
        if (t <= 0.0 || t >= 1.0) return 0.0;
        double cs = std::cosh(s);
        double w = 0.25 * pi * std::cosh(u) / (cs * cs);
        if (w == 0.0) return 0.0;
        return f(t) * w;
    };
    double lo = de_extent(g, -1.0, 6.0), hi = de_extent(g, 1.0, 6.0);
    return de_trapezoid(g, -lo, hi, tol, max_level);
}

// Integral over [1,inf) of f(t) (exp-sinh).
template <class F>
DEResult exp_sinh_1inf(F&& f, double tol = 1e-12, int max_level = 9) {
    auto g = [&](double u) -> cplx {
        double s = 0.5 * pi * std::sinh(u);
        if (s > 700.0) return 0.0;
        double e = std::exp(s);
        double t = 1.0 + e;
        double w = 0.5 * pi * std::cosh(u) * e;
        if (w == 0.0) return 0.0;
        return f(t) * w;
    };
    double lo = de_extent(g, -1.0, 6.0), hi = de_extent(g, 1.0, 6.0);
    return de_trapezoid(g, -lo, hi, tol, max_level);
}

}  // namespace magloc::quad

#endif
