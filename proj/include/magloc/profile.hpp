#ifndef MAGLOC_PROFILE_HPP
#define MAGLOC_PROFILE_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include "core.hpp"

namespace magloc {

enum class ProfileFamily { plateau, scaled_bump };

// u(x) = w(x1) w(x2). Plateau: w is 1 on |t| <= 1/2-delta and falls to 0 on a smoothstep ramp.
// Scaled bump: w(t) = delta * (15/16) * (1 - (delta t)^2)^2, so u = delta^2 u0(delta x) with unit integral.
struct ProfileSpec {
    ProfileFamily family = ProfileFamily::plateau;
    double delta = 0.1;

    void check() const {
        if (!(delta > 0.0)) throw ConfigError("profile.delta must be positive");
        if (family == ProfileFamily::plateau && !(delta < 0.5)) throw ConfigError("plateau profile needs delta < 1/2");
        if (family == ProfileFamily::scaled_bump && !(delta <= 1.0)) throw ConfigError("scaled-bump profile needs delta <= 1");
    }

    double support_radius() const { return family == ProfileFamily::plateau ? 0.5 + delta : 1.0 / delta; }

    // Smallest admissible c_delta (distance beyond which coefficient bumps cannot overlap a box).
    int c_delta() const {
        if (family == ProfileFamily::plateau) return 2;
        return static_cast<int>(std::ceil(1.0 / delta - 1e-12));
    }

    double w(double t) const;
    double dw(double t) const;
    double d2w(double t) const;
    double antiderivative(double t) const;  // integral of w over (-inf, t]
};

inline constexpr double bump_norm = 15.0 / 16.0;

namespace detail {
inline double smoothstep(double y) { return y * y * (3.0 - 2.0 * y); }
inline double smoothstep_d(double y) { return 6.0 * y * (1.0 - y); }
inline double smoothstep_d2(double y) { return 6.0 - 12.0 * y; }
inline double smoothstep_int(double y) { return y * y * y - 0.5 * y * y * y * y; }
inline double g_bump(double s) { double q = 1.0 - s * s; return std::abs(s) >= 1.0 ? 0.0 : q * q; }
inline double g_bump_d(double s) { return std::abs(s) >= 1.0 ? 0.0 : -4.0 * s * (1.0 - s * s); }
inline double g_bump_d2(double s) { return std::abs(s) >= 1.0 ? 0.0 : -4.0 + 12.0 * s * s; }
inline double g_bump_int(double s) {
    s = std::clamp(s, -1.0, 1.0);
    return s - 2.0 * s * s * s / 3.0 + s * s * s * s * s / 5.0 + 8.0 / 15.0;
}
}  // namespace detail

inline double ProfileSpec::w(double t) const {
    if (family == ProfileFamily::scaled_bump) return delta * bump_norm * detail::g_bump(delta * t);
    double a = std::abs(t);
    if (a <= 0.5 - delta) return 1.0;
    if (a >= 0.5 + delta) return 0.0;
    return detail::smoothstep((0.5 + delta - a) / (2.0 * delta));
}

inline double ProfileSpec::dw(double t) const {
    if (family == ProfileFamily::scaled_bump) return delta * delta * bump_norm * detail::g_bump_d(delta * t);
    double a = std::abs(t);
    if (a <= 0.5 - delta || a >= 0.5 + delta) return 0.0;
    double sgn = t > 0.0 ? -1.0 : 1.0;
    return sgn * detail::smoothstep_d((0.5 + delta - a) / (2.0 * delta)) / (2.0 * delta);
}

inline double ProfileSpec::d2w(double t) const {
    if (family == ProfileFamily::scaled_bump) return delta * delta * delta * bump_norm * detail::g_bump_d2(delta * t);
    double a = std::abs(t);
    if (a <= 0.5 - delta || a >= 0.5 + delta) return 0.0;
    return detail::smoothstep_d2((0.5 + delta - a) / (2.0 * delta)) / (4.0 * delta * delta);
}

inline double ProfileSpec::antiderivative(double t) const {
    if (family == ProfileFamily::scaled_bump) return bump_norm * detail::g_bump_int(delta * t);
    if (t <= -0.5 - delta) return 0.0;
    if (t >= 0.5 + delta) return 1.0;
    if (t <= -0.5 + delta) return 2.0 * delta * detail::smoothstep_int((t + 0.5 + delta) / (2.0 * delta));
    if (t <= 0.5 - delta) return t + 0.5;
    return 1.0 - 2.0 * delta * detail::smoothstep_int((0.5 + delta - t) / (2.0 * delta));
}

inline double profile_value(const ProfileSpec& p, Vec2 x) { return p.w(x.x) * p.w(x.y); }

inline Vec2 profile_gradient(const ProfileSpec& p, Vec2 x) {
    return {p.dw(x.x) * p.w(x.y), p.w(x.x) * p.dw(x.y)};
}

// sup of |grad u0| for the bump descriptor u0 = (15/16)^2 g(s1) g(s2).
inline double bump_gradient_sup() {
    static const double value = [] {
        double best = 0.0;
        const int n = 600;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                double s1 = -1.0 + 2.0 * i / n, s2 = -1.0 + 2.0 * j / n;
                double gx = detail::g_bump_d(s1) * detail::g_bump(s2);
                double gy = detail::g_bump(s1) * detail::g_bump_d(s2);
                best = std::max(best, std::hypot(gx, gy));
            }
        return bump_norm * bump_norm * best;
    }();
    return value;
}

inline double delta0(const ProfileSpec& p) {
    if (p.family == ProfileFamily::plateau) return 1.0 / 3200.0;
    double g = bump_gradient_sup();
    return 1.0 / (640.0 + 32.0 * g * g);
}

// U(x) = sum over z in Z^2 of u(x - z).
inline double profile_sum(const ProfileSpec& p, Vec2 x) {
    double r = p.support_radius();
    double sx = 0.0, sy = 0.0;
    for (long i = static_cast<long>(std::ceil(x.x - r)); i <= static_cast<long>(std::floor(x.x + r)); ++i) sx += p.w(x.x - i);
    for (long j = static_cast<long>(std::ceil(x.y - r)); j <= static_cast<long>(std::floor(x.y + r)); ++j) sy += p.w(x.y - j);
    return sx * sy;
}

inline Vec2 profile_sum_gradient(const ProfileSpec& p, Vec2 x) {
    double r = p.support_radius();
    double sx = 0.0, sy = 0.0, dx = 0.0, dy = 0.0;
    for (long i = static_cast<long>(std::ceil(x.x - r)); i <= static_cast<long>(std::floor(x.x + r)); ++i) {
        sx += p.w(x.x - i);
        dx += p.dw(x.x - i);
    }
    for (long j = static_cast<long>(std::ceil(x.y - r)); j <= static_cast<long>(std::floor(x.y + r)); ++j) {
        sy += p.w(x.y - j);
        dy += p.dw(x.y - j);
    }
    return {dx * sy, sx * dy};
}

struct ProfileSumBounds {
    double c_u = 0.0;
    double sup_u = 0.0;
    double scan_min = 0.0;
    double scan_max = 0.0;
    double margin = 0.0;
    bool sup_ok = false;
    double tolerance = 0.0;
};

// Grid scan of U over one unit cell with a Lipschitz margin from the scanned gradient.
inline ProfileSumBounds profile_sum_bounds(const ProfileSpec& p, int resolution = 64, double tolerance = 1e-5) {
    ProfileSumBounds b;
    b.scan_min = 1e300;
    b.scan_max = -1e300;
    double lip = 0.0, h = 1.0 / resolution;
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j) {
            Vec2 x{i * h, j * h};
            double u = profile_sum(p, x);
            b.scan_min = std::min(b.scan_min, u);
            b.scan_max = std::max(b.scan_max, u);
            lip = std::max(lip, profile_sum_gradient(p, x).norm());
        }
    b.margin = lip * h * std::sqrt(2.0) / 2.0;
    b.c_u = b.scan_min - b.margin;
    b.sup_u = b.scan_max + b.margin;
    b.tolerance = tolerance;
    b.sup_ok = b.sup_u <= 1.0 + tolerance;
    return b;
}

inline double profile_gradient_sup(const ProfileSpec& p) {
    double best = 0.0;
    if (p.family == ProfileFamily::scaled_bump) return p.delta * p.delta * p.delta * bump_gradient_sup();
    // plateau: |w'| peaks at the ramp midpoint with value 1.5/(2 delta); w <= 1
    double m = 1.5 / (2.0 * p.delta);
    best = m;
    return best;
}

}  // namespace magloc

#endif
