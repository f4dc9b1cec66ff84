#ifndef MAGLOC_LANDAU_RESOLVENT_HPP
#define MAGLOC_LANDAU_RESOLVENT_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "core.hpp"
#include "quadrature.hpp"
#include "special.hpp"

namespace magloc {

struct KernelQuery {
    double B0 = 1.0;
    cplx z;
    Vec2 x, y;

    cplx w() const { return 0.5 - z / (2.0 * B0); }
    double zeta() const { Vec2 d = x - y; return 0.5 * B0 * d.dot(d); }
    double symplectic() const { return x.x * y.y - x.y * y.x; }
};

namespace detail {

struct Integrals {
    cplx value;
    cplx derivative;
};

// Gamma(a) U(a,1;zeta) = int_0^inf e^{-zeta t} t^{a-1} (1+t)^{-a} dt and its zeta-derivative, Re a > 0.
inline Integrals gamma_u_integrals(cplx a, double zeta, bool want_derivative) {
    const double tol = 1e-10;
    auto integrand = [&](double t) { return std::exp(-zeta * t + (a - 1.0) * std::log(t) - a * std::log1p(t)); };
    auto check = [&](const quad::DEResult& r, const char* what, double lo, double hi) {
        if (!(r.rel_change < tol) || !std::isfinite(std::abs(r.value)))
            throw QuadratureError(std::string("confluent_u: ") + what + " quadrature did not converge", lo, hi);
        return r.value;
    };
    Integrals out;
    out.value = check(quad::tanh_sinh_01(integrand, tol), "[0,1]", 0.0, 1.0) +
                check(quad::exp_sinh_1inf(integrand, tol), "[1,inf)", 1.0, INFINITY);
    if (want_derivative) {
        auto d = [&](double t) { return -t * integrand(t); };
        out.derivative = check(quad::tanh_sinh_01(d, tol), "[0,1]", 0.0, 1.0) +
                         check(quad::exp_sinh_1inf(d, tol), "[1,inf)", 1.0, INFINITY);
    }
    return out;
}

inline void require_zeta(double zeta) {
    if (zeta == 0.0) throw DomainError("confluent_u: zeta = 0 (logarithmic singularity)");
    if (!(zeta > 0.0) || !std::isfinite(zeta)) throw DomainError("confluent_u: zeta must be positive and finite");
}

}  // namespace detail

// Number of recurrence steps that move Re a into the quadrature strip Re >= 1/2.
inline int recurrence_shifts(cplx a) {
    double need = 0.5 - a.real();
    return need > 0.0 ? static_cast<int>(std::ceil(need - 1e-15)) : 0;
}

struct UPair {
    cplx u;
    cplx du;
};

// U(a,1;zeta) and d/dzeta using `shifts` downward applications of
// U(a) = (1+2a+zeta) U(a+1) - (a+1)^2 U(a+2) from quadrature values at a+shifts, a+shifts+1.
inline UPair confluent_u_shifted(cplx a, double zeta, int shifts, bool want_derivative = true) {
    detail::require_zeta(zeta);
    if (shifts < 0) throw DomainError("confluent_u_shifted: negative shift count");
    if (a.real() + shifts < 0.5) throw DomainError("confluent_u_shifted: shift count does not reach Re a >= 1/2");
    auto direct = [&](cplx b) {
        auto r = detail::gamma_u_integrals(b, zeta, want_derivative);
        cplx g = gamma_fn(b);
        return UPair{r.value / g, r.derivative / g};
    };
    if (shifts == 0) return direct(a);
    UPair hi = direct(a + static_cast<double>(shifts + 1));
    UPair mid = direct(a + static_cast<double>(shifts));
    for (int s = shifts - 1; s >= 0; --s) {
        cplx b = a + static_cast<double>(s);
        cplx c = 1.0 + 2.0 * b + zeta, d = (b + 1.0) * (b + 1.0);
        UPair lo{c * mid.u - d * hi.u, mid.u + c * mid.du - d * hi.du};
        hi = mid;
        mid = lo;
    }
    return mid;
}

inline cplx confluent_u(cplx a, double zeta) { return confluent_u_shifted(a, zeta, recurrence_shifts(a), false).u; }

inline cplx confluent_u_prime(cplx a, double zeta) { return confluent_u_shifted(a, zeta, recurrence_shifts(a), true).du; }

// Gamma(w) U(w,1;zeta), without dividing by Gamma in the quadrature strip.
inline cplx gamma_times_u(cplx w, double zeta, double exclusion = 5e-7) {
    detail::require_zeta(zeta);
    if (w.real() >= 0.5) return detail::gamma_u_integrals(w, zeta, false).value;
    return gamma_fn(w, exclusion) * confluent_u(w, zeta);
}

inline double landau_level_distance(double B0, cplx z) {
    double n = std::max(0.0, std::round((z.real() / B0 - 1.0) / 2.0));
    return std::abs(z - cplx(B0 * (2.0 * n + 1.0), 0.0));
}

// Resolvent kernel of (p - A)^2 with A = (B0/2)(-x2, x1).
inline cplx landau_kernel(const KernelQuery& q, double exclusion_rel = 1e-6) {
    if (!(q.B0 > 0.0)) throw DomainError("landau_kernel: B0 must be positive");
    double zeta = q.zeta();
    if (zeta == 0.0) throw DomainError("landau_kernel: x = y");
    double d = landau_level_distance(q.B0, q.z);
    if (d < exclusion_rel * q.B0) throw PoleError("landau_kernel: z within the pole exclusion radius of a Landau level", d);
    cplx gu = gamma_times_u(q.w(), zeta, 0.5 * exclusion_rel);
    cplx phase = std::exp(cplx(-0.5 * zeta, -0.5 * q.B0 * q.symplectic()));
    return gu * phase / (4.0 * pi);
}

struct KernelAuditRow {
    double re_z, im_z, zeta, abs_kernel, gamma_ratio, u_ratio, u3_ratio;
};

struct KernelAudit {
    int n = 0;
    double B0 = 1.0;
    double C_gamma = 0.0;
    double C_u = 0.0;
    double C_u3 = 0.0;
    int skipped = 0;
    std::vector<KernelAuditRow> rows;
};

// Empirical constants for |Gamma(w)| <= C (B0/|z - B0(2n+1)| + 1), |U| <= C (1 + |ln zeta| + zeta^{n+1})
// and |U'| <= C (1 + 1/zeta + zeta^{n+1}) over the grids.
inline KernelAudit kernel_bound_audit(double B0, int n, const std::vector<cplx>& zs, const std::vector<double>& zetas,
                                      double exclusion_rel = 1e-6) {
    KernelAudit rep;
    rep.n = n;
    rep.B0 = B0;
    double level = B0 * (2.0 * n + 1.0);
    for (cplx z : zs) {
        if (z.real() < 2.0 * n * B0 - 1e-12 || z.real() > (2.0 * n + 2.0) * B0 + 1e-12 || std::abs(z.imag()) > B0 + 1e-12)
            throw DomainError("kernel_bound_audit: z outside the level window");
        double dist = std::abs(z - level);
        if (dist < exclusion_rel * B0 || landau_level_distance(B0, z) < exclusion_rel * B0) {
            ++rep.skipped;
            continue;
        }
        cplx w = 0.5 - z / (2.0 * B0);
        cplx g = gamma_fn(w, 0.5 * exclusion_rel);
        double gr = std::abs(g) / (B0 / dist + 1.0);
        rep.C_gamma = std::max(rep.C_gamma, gr);
        for (double zeta : zetas) {
            UPair u = confluent_u_shifted(w, zeta, recurrence_shifts(w), true);
            double ur = std::abs(u.u) / (1.0 + std::abs(std::log(zeta)) + std::pow(zeta, n + 1));
            double u3 = std::abs(u.du) / (1.0 + 1.0 / zeta + std::pow(zeta, n + 1));
            rep.C_u = std::max(rep.C_u, ur);
            rep.C_u3 = std::max(rep.C_u3, u3);
            double ak = std::abs(g * u.u) * std::exp(-0.5 * zeta) / (4.0 * pi);
            rep.rows.push_back({z.real(), z.imag(), zeta, ak, gr, ur, u3});
        }
    }
    return rep;
}

}  // namespace magloc

#endif
