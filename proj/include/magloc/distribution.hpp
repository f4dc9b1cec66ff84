#ifndef MAGLOC_DISTRIBUTION_HPP
#define MAGLOC_DISTRIBUTION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "core.hpp"
#include "quadrature.hpp"

namespace magloc {

enum class DistShape { beta, point };

// Per-scale coefficient law. Scale k has support [lo*sigma_k, hi*sigma_k] and density
// proportional to ((s - m-)(m+ - s))^(tau-1); `point` puts all mass at at*sigma_k.
struct DistributionSpec {
    DistShape shape = DistShape::beta;
    int tau = 3;
    double lo = -1.0;
    double hi = 1.0;
    double at = 0.0;
    double c_v = 10.0;
    double c2 = 100.0;

    int power() const { return tau - 1; }

    void check() const {
        if (shape == DistShape::beta) {
            if (tau < 1) throw ConfigError("dist.tau must be an integer >= 1");
            if (!(lo < hi)) throw ConfigError("dist support needs lo < hi");
            if (lo < -1.0 || hi > 1.0) throw ConfigError("dist support must lie in [-1, 1] (units of sigma_k)");
        } else if (at < -1.0 || at > 1.0) {
            throw ConfigError("dist.at must lie in [-1, 1]");
        }
    }

    double m_minus(double sigma) const { return shape == DistShape::point ? at * sigma : lo * sigma; }
    double m_plus(double sigma) const { return shape == DistShape::point ? at * sigma : hi * sigma; }
    double width(double sigma) const { return m_plus(sigma) - m_minus(sigma); }
    double mean(double sigma) const { return 0.5 * (m_minus(sigma) + m_plus(sigma)); }
    // ess sup [omega]_+ and -ess sup [-omega]_+
    double extremal(double sigma, int sign) const {
        return sign > 0 ? std::max(0.0, m_plus(sigma)) : std::min(0.0, m_minus(sigma));
    }

    // Density of the unit-interval law y in [0,1].
    double unit_density(double y) const {
        if (y < 0.0 || y > 1.0) return 0.0;
        int p = power();
        return std::pow(y * (1.0 - y), p) / beta_pp(p);
    }
    double unit_density_d(double y) const {
        int p = power();
        if (p == 0 || y <= 0.0 || y >= 1.0) return 0.0;
        double q = y * (1.0 - y);
        return p * std::pow(q, p - 1) * (1.0 - 2.0 * y) / beta_pp(p);
    }
    double unit_density_d2(double y) const {
        int p = power();
        if (p == 0 || y <= 0.0 || y >= 1.0) return 0.0;
        double q = y * (1.0 - y), dq = 1.0 - 2.0 * y;
        double v = -2.0 * p * std::pow(q, p - 1);
        if (p >= 2) v += p * (p - 1.0) * std::pow(q, p - 2) * dq * dq;
        return v / beta_pp(p);
    }

    // Regularized incomplete beta I_y(p+1, p+1) as a binomial sum.
    double unit_cdf(double y) const {
        if (y <= 0.0) return 0.0;
        if (y >= 1.0) return 1.0;
        int p = power(), n = 2 * p + 1;
        double s = 0.0, c = 1.0;
        for (int j = 0; j <= n; ++j) {
            if (j > 0) c = c * (n - j + 1) / j;
            if (j >= p + 1) s += c * std::pow(y, j) * std::pow(1.0 - y, n - j);
        }
        return s;
    }

    double unit_quantile(double u) const {
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 64; ++it) {
            double m = 0.5 * (a + b);
            if (unit_cdf(m) < u) a = m;
            else b = m;
        }
        return 0.5 * (a + b);
    }

    // Inverse-CDF draw at scale width sigma from a uniform u in (0,1).
    double draw(double sigma, double u) const {
        if (shape == DistShape::point) return at * sigma;
        return m_minus(sigma) + width(sigma) * unit_quantile(u);
    }

    static double beta_pp(int p) {
        // B(p+1, p+1) = (p!)^2 / (2p+1)!
        double v = 1.0;
        for (int i = 1; i <= p; ++i) v *= static_cast<double>(i) / (p + i);
        return v / (2.0 * p + 1.0);
    }

    // Integral of |v''| at scale width sigma; infinite when the density or its derivative jumps.
    double second_derivative_mass(double sigma) const {
        if (shape == DistShape::point) return std::numeric_limits<double>::infinity();
        int p = power();
        if (p == 0) return std::numeric_limits<double>::infinity();
        double total = 0.0;
        const int panels = 400;
        for (int i = 0; i < panels; ++i) {
            double a = static_cast<double>(i) / panels, b = static_cast<double>(i + 1) / panels;
            total += quad::gauss_legendre_integrate([&](double y) { return std::abs(unit_density_d2(y)); }, a, b, 8);
        }
        if (p == 1) total += 2.0 / beta_pp(1);  // v' jumps by 1/B(2,2) at each end
        double w = width(sigma);
        return total / (w * w);
    }
};

// nu_+(h): mass within h of the top of the support; nu_-(h): within h of the bottom.
// Integrates the polynomial density with a Gauss-Legendre rule that is exact for its degree.
inline double tail_probability(const DistributionSpec& d, double sigma0, int sign, double h) {
    if (h < 0.0 || std::isnan(h)) throw DomainError("tail_probability: h must be >= 0");
    if (d.shape == DistShape::point) return 1.0;
    double w = d.width(sigma0);
    if (h >= w) return 1.0;
    double y = h / w;
    int n = d.power() + 2;
    double a = sign > 0 ? 1.0 - y : 0.0;
    double b = sign > 0 ? 1.0 : y;
    double v = quad::gauss_legendre_integrate([&](double t) { return d.unit_density(t); }, a, b, std::min(n, 64));
    return std::clamp(v, 0.0, 1.0);
}

}  // namespace magloc

#endif
