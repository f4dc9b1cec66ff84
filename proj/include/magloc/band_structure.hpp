#ifndef MAGLOC_BAND_STRUCTURE_HPP
#define MAGLOC_BAND_STRUCTURE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "field_model.hpp"

namespace magloc {

struct ClassicalEdges {
    int n = 0;
    double e_min = 0.0;
    double e_max = 0.0;
    double grad_b = 0.0;  // grid sup |grad B|
    double grad_v = 0.0;  // grid sup |grad V|
    double b_min = 0.0;
    double b_max = 0.0;
    double margin = 0.0;  // Lipschitz margin for values between grid points
};

// Grid inf/sup of (2n+1)B + V over `cell` on a (resolution+1)^2 grid including the cell boundary.
// Doubling the resolution refines the grid, so e_max never decreases and e_min never increases.
inline ClassicalEdges classical_edges(const ScalarField& B, const ScalarField& V, int n, Rect cell = {{0, 0}, {1, 1}},
                                     int resolution = 64, std::optional<double> lipschitz = std::nullopt) {
    if (n < 0) throw DomainError("classical_edges: n must be >= 0");
    if (resolution < 1) throw DomainError("classical_edges: resolution must be >= 1");
    ClassicalEdges e;
    e.n = n;
    e.e_min = std::numeric_limits<double>::infinity();
    e.e_max = -e.e_min;
    e.b_min = e.e_min;
    e.b_max = -e.e_min;
    double f = 2.0 * n + 1.0;
    double dx = cell.width() / resolution, dy = cell.height() / resolution;
    for (int j = 0; j <= resolution; ++j)
        for (int i = 0; i <= resolution; ++i) {
            Vec2 x{cell.lo.x + i * dx, cell.lo.y + j * dy};
            double b = B.value(x), v = f * b + V.value(x);
            e.e_min = std::min(e.e_min, v);
            e.e_max = std::max(e.e_max, v);
            e.b_min = std::min(e.b_min, b);
            e.b_max = std::max(e.b_max, b);
            e.grad_b = std::max(e.grad_b, B.gradient(x).norm());
            e.grad_v = std::max(e.grad_v, V.gradient(x).norm());
        }
    double L = lipschitz ? *lipschitz : f * e.grad_b + e.grad_v;
    e.margin = L * 0.5 * std::hypot(dx, dy);
    return e;
}

namespace detail {

inline Rect unit_cell() { return {{0, 0}, {1, 1}}; }

inline RandomField extremal_field(const std::shared_ptr<const FieldModelConfig>& cfg, int sign) {
    return RandomField(cfg, std::make_shared<const FieldSample>(extremal_sample(*cfg, unit_cell(), sign)));
}

}  // namespace detail

struct BandEdges {
    int n = 0;
    double E_minus = 0.0;
    double E_plus = 0.0;
    double margin = 0.0;
    double truncation = 0.0;  // (2n+1) mu times the tail of the discarded scales
    double b_min = 0.0;       // field range of the extremal configurations
    double b_max = 0.0;
};

// E_n^- from the minimal configuration, E_n^+ from the maximal one; both fields are Z^2-periodic.
inline BandEdges band_edges(const FieldModelConfig& config, int n, int resolution = 64) {
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    auto lo = classical_edges(detail::extremal_field(cfg, -1), config.v, n, detail::unit_cell(), resolution);
    auto hi = classical_edges(detail::extremal_field(cfg, +1), config.v, n, detail::unit_cell(), resolution);
    BandEdges b;
    b.n = n;
    b.E_minus = lo.e_min;
    b.E_plus = hi.e_max;
    b.margin = std::max(lo.margin, hi.margin);
    b.truncation = (2.0 * n + 1.0) * config.mu * truncation_bound(config);
    b.b_min = lo.b_min;
    b.b_max = hi.b_max;
    return b;
}

struct FluctuationConstants {
    double K2_plus = 0.0, K2_minus = 0.0;
    double K3_plus = 0.0, K3_minus = 0.0;
    double K2 = 0.0;       // ess sup_omega |grad B_omega| + |grad V|
    double K3 = 0.0;       // (ess sup_omega |grad B_omega|)^2
    double grad_v = 0.0;
    int directions = 64;
};

// Per grid point, the sup over admissible coefficients of e . grad B is reached by putting every
// coefficient at m+ or m- according to the sign of its contribution; the sup over e of those values
// is taken over `directions` unit vectors.
inline FluctuationConstants fluctuation_constants(const FieldModelConfig& config, int resolution = 64, int directions = 64) {
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    Rect cell = detail::unit_cell();
    auto plus = detail::extremal_field(cfg, +1), minus = detail::extremal_field(cfg, -1);
    FluctuationConstants out;
    out.directions = directions;
    PeriodicField det = config.b_det();
    const auto& p = config.profile;
    double r = p.support_radius();
    auto layout = extremal_sample(config, cell, +1);
    double gp = 0.0, gm = 0.0, gsup = 0.0;
    std::vector<Vec2> dirs(directions);
    for (int d = 0; d < directions; ++d) dirs[d] = {std::cos(2 * pi * d / directions), std::sin(2 * pi * d / directions)};
    std::vector<double> best(directions);
    for (int j = 0; j <= resolution; ++j)
        for (int i = 0; i <= resolution; ++i) {
            Vec2 x{cell.lo.x + cell.width() * i / resolution, cell.lo.y + cell.height() * j / resolution};
            gp = std::max(gp, plus.gradient(x).norm());
            gm = std::max(gm, minus.gradient(x).norm());
            out.grad_v = std::max(out.grad_v, config.v.gradient(x).norm());
            Vec2 g0 = det.gradient(x);
            for (int d = 0; d < directions; ++d) best[d] = dirs[d].dot(g0);
            for (const auto& l : layout.layers) {
                double s = std::ldexp(1.0, l.k), sig = config.sigma(l.k);
                double mlo = config.mu * config.dist.m_minus(sig), mhi = config.mu * config.dist.m_plus(sig);
                double X = s * x.x, Y = s * x.y;
                for (long b = static_cast<long>(std::ceil(Y - r)); b <= static_cast<long>(std::floor(Y + r)); ++b)
                    for (long a = static_cast<long>(std::ceil(X - r)); a <= static_cast<long>(std::floor(X + r)); ++a) {
                        Vec2 gc{s * p.dw(X - a) * p.w(Y - b), s * p.w(X - a) * p.dw(Y - b)};
                        if (gc.x == 0.0 && gc.y == 0.0) continue;
                        for (int d = 0; d < directions; ++d) {
                            double c = dirs[d].dot(gc);
                            best[d] += std::max(mlo * c, mhi * c);
                        }
                    }
            }
            for (double v : best) gsup = std::max(gsup, v);
        }
    out.K2_plus = gp + out.grad_v;
    out.K2_minus = gm + out.grad_v;
    out.K3_plus = gp * gp;
    out.K3_minus = gm * gm;
    out.K2 = gsup + out.grad_v;
    out.K3 = gsup * gsup;
    return out;
}

struct ForbiddenInterval {
    int n = 0;
    double lower = 0.0;  // I^+_n
    double upper = 0.0;  // I^-_{n+1}
    double e_max_n = 0.0;
    double e_min_next = 0.0;
    double K2 = 0.0, K3 = 0.0;
    double correction = 0.0;  // K2 B0^-1/2 + K3 B0^-2
    double C_ext = 1.0;
    bool empty = false;
};

namespace detail {
inline ForbiddenInterval make_interval(int n, double emax, double emin_next, double K2, double K3, double B0, double C_ext) {
    if (!(C_ext > 0.0)) throw DomainError("forbidden_interval: C_ext must be positive");
    ForbiddenInterval f;
    f.n = n;
    f.e_max_n = emax;
    f.e_min_next = emin_next;
    f.K2 = K2;
    f.K3 = K3;
    f.correction = K2 / std::sqrt(B0) + K3 / (B0 * B0);
    f.C_ext = C_ext;
    f.lower = emax + C_ext * f.correction;
    f.upper = emin_next - C_ext * f.correction;
    f.empty = f.lower >= f.upper;
    return f;
}
}  // namespace detail

// Explicit field B = B0 + B1 with the sandwich C1^-1 B0 <= B <= C1 B0 checked on the grid.
inline ForbiddenInterval forbidden_interval(const ScalarField& B, const ScalarField& V, double B0, int n, double C_ext,
                                            double C1, Rect cell = {{0, 0}, {1, 1}}, int resolution = 64) {
    if (!(B0 > 0.0) || !(C1 >= 1.0)) throw DomainError("forbidden_interval: need B0 > 0 and C1 >= 1");
    auto a = classical_edges(B, V, n, cell, resolution);
    auto b = classical_edges(B, V, n + 1, cell, resolution);
    if (a.b_min < B0 / C1 || a.b_max > C1 * B0)
        throw DomainError("forbidden_interval: field leaves [B0/C1, C1 B0] (range [" + std::to_string(a.b_min) + ", " +
                          std::to_string(a.b_max) + "])");
    double g = a.grad_b;
    return detail::make_interval(n, a.e_max, b.e_min, g + a.grad_v, g * g, B0, C_ext);
}

// Version taking the sup over the support of the measure: E_n^+, E_{n+1}^- and the ess-sup constants.
inline ForbiddenInterval forbidden_interval(const FieldModelConfig& config, int n, double C_ext, int resolution = 64) {
    auto lo = band_edges(config, n, resolution);
    auto hi = band_edges(config, n + 1, resolution);
    auto k = fluctuation_constants(config, resolution);
    return detail::make_interval(n, lo.E_plus, hi.E_minus, k.K2, k.K3, config.B0, C_ext);
}

// Smallest C_ext for which the observed top of band n and bottom of band n+1 stay outside the interval.
inline double calibrate_c_ext(const ForbiddenInterval& f, double observed_top_n, double observed_bottom_next) {
    if (f.correction <= 0.0) return 0.0;
    double c = std::max((observed_top_n - f.e_max_n) / f.correction, (f.e_min_next - observed_bottom_next) / f.correction);
    return std::max(0.0, c);
}

struct BandEstimate {
    int n = 0;
    double E_minus = 0.0, E_plus = 0.0;
    double lower = 0.0, upper = 0.0;  // E_n^- - C_int corr^-, E_n^+ + C_int corr^+
    double gap_above = 0.0;           // lower of band n+1 minus upper of band n
    bool overlaps_next = false;
    ForbiddenInterval forbidden;      // resolvent-set interval above band n
};

struct SigmaBandReport {
    std::vector<BandEstimate> bands;
    int first_overlap = -1;
    bool constant_background = false;  // B_var = 0 and V = 0, band structure statement applies
};

inline SigmaBandReport sigma_band_report(const FieldModelConfig& config, int n_max, double C_ext, double C_int, int resolution = 64) {
    if (n_max < 0) throw DomainError("sigma_band_report: n_max must be >= 0");
    SigmaBandReport rep;
    rep.constant_background = config.b_var.is_constant() && config.v.is_constant() && config.v.constant() == 0.0;
    auto k = fluctuation_constants(config, resolution);
    double b0 = config.b0;
    double cm = C_int * (k.K2_minus / std::sqrt(b0) + k.K3_minus / (b0 * b0));
    double cp = C_int * (k.K2_plus / std::sqrt(b0) + k.K3_plus / (b0 * b0));
    for (int n = 0; n <= n_max + 1; ++n) {
        auto e = band_edges(config, n, resolution);
        rep.bands.push_back({n, e.E_minus, e.E_plus, e.E_minus - cm, e.E_plus + cp, 0.0, false, {}});
    }
    for (int n = 0; n <= n_max; ++n) {
        auto& b = rep.bands[n];
        b.gap_above = rep.bands[n + 1].lower - b.upper;
        b.overlaps_next = b.gap_above <= 0.0;
        if (b.overlaps_next && rep.first_overlap < 0) rep.first_overlap = n;
        b.forbidden = detail::make_interval(n, b.E_plus, rep.bands[n + 1].E_minus, k.K2, k.K3, config.B0, C_ext);
    }
    rep.bands.pop_back();
    return rep;
}

struct LocalizationWindow {
    int n = 0;
    double lo = 0.0, hi = 0.0;
    bool empty = false;
};

// I_n = [E_n^+ - eps, E_{n+1}^- + eps]
inline LocalizationWindow localization_window(const FieldModelConfig& config, int n, double eps, int resolution = 64) {
    if (!(eps > 0.0)) throw DomainError("localization_window: eps must be positive");
    auto a = band_edges(config, n, resolution);
    auto b = band_edges(config, n + 1, resolution);
    LocalizationWindow w{n, a.E_plus - eps, b.E_minus + eps, false};
    w.empty = w.lo > w.hi;
    return w;
}

}  // namespace magloc

#endif
