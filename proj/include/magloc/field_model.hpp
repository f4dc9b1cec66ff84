#ifndef MAGLOC_FIELD_MODEL_HPP
#define MAGLOC_FIELD_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "distribution.hpp"
#include "profile.hpp"
#include "rng.hpp"
#include "scalar_field.hpp"

namespace magloc {

struct FieldModelConfig {
    double B0 = 10.0;
    double b0 = 5.0;
    double mu = 0.5;
    double rho = 1.0;
    double c_ran = 1.0;
    double K0 = 4.0;
    int k_max = 3;
    ProfileSpec profile;
    DistributionSpec dist;
    PeriodicField b_var;
    PeriodicField v;
    double coefficient_cap = 4e6;

    double sigma(int k) const { return c_ran * std::exp(-rho * k); }
    PeriodicField b_det() const { return b_var.plus_constant(B0); }

    void check() const {
        profile.check();
        dist.check();
        if (!(B0 > 0.0)) throw ConfigError("model.B0 must be positive");
        if (!(c_ran >= 0.0)) throw ConfigError("model.c_ran must be >= 0");
        if (!(rho > 0.0)) throw ConfigError("model.rho must be positive");
        if (k_max < 0) throw ConfigError("model.k_max must be >= 0");
        if (!(mu >= 0.0)) throw ConfigError("model.mu must be >= 0");
        if (!(coefficient_cap > 0.0)) throw ConfigError("coefficient cap must be positive");
    }
};

// Coefficients of one scale on the lattice (2^-k Z)^2, indices i in [i0, i0+ni), j in [j0, j0+nj).
struct ScaleLayer {
    int k = 0;
    long i0 = 0, j0 = 0;
    long ni = 0, nj = 0;
    std::vector<double> omega;
    std::vector<double> row_prefix;
    std::vector<double> col_prefix;

    bool has(long i, long j) const { return i >= i0 && i < i0 + ni && j >= j0 && j < j0 + nj; }
    double at(long i, long j) const { return omega[(i - i0) + ni * (j - j0)]; }
    double& ref(long i, long j) { return omega[(i - i0) + ni * (j - j0)]; }

    void build_prefix() {
        row_prefix.assign(static_cast<size_t>(nj * (ni + 1)), 0.0);
        col_prefix.assign(static_cast<size_t>(ni * (nj + 1)), 0.0);
        for (long jj = 0; jj < nj; ++jj)
            for (long ii = 0; ii < ni; ++ii)
                row_prefix[jj * (ni + 1) + ii + 1] = row_prefix[jj * (ni + 1) + ii] + omega[ii + ni * jj];
        for (long ii = 0; ii < ni; ++ii)
            for (long jj = 0; jj < nj; ++jj)
                col_prefix[ii * (nj + 1) + jj + 1] = col_prefix[ii * (nj + 1) + jj] + omega[ii + ni * jj];
    }
    // sum of omega(i, j) for i in [a, b]
    double row_sum(long j, long a, long b) const {
        if (a > b) return 0.0;
        const double* p = &row_prefix[(j - j0) * (ni + 1)];
        return p[b - i0 + 1] - p[a - i0];
    }
    double col_sum(long i, long a, long b) const {
        if (a > b) return 0.0;
        const double* p = &col_prefix[(i - i0) * (nj + 1)];
        return p[b - j0 + 1] - p[a - j0];
    }
};

struct FieldSample {
    std::uint64_t seed = 0;
    Rect region;
    std::string kind = "random";
    std::vector<ScaleLayer> layers;

    size_t coefficient_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.omega.size();
        return n;
    }
};

using SamplePtr = std::shared_ptr<const FieldSample>;

namespace detail {

inline ScaleLayer layer_for(const FieldModelConfig& cfg, const Rect& region, int k) {
    double s = std::ldexp(1.0, k), r = cfg.profile.support_radius();
    ScaleLayer l;
    l.k = k;
    l.i0 = static_cast<long>(std::ceil(s * region.lo.x - r));
    l.j0 = static_cast<long>(std::ceil(s * region.lo.y - r));
    l.ni = static_cast<long>(std::floor(s * region.hi.x + r)) - l.i0 + 1;
    l.nj = static_cast<long>(std::floor(s * region.hi.y + r)) - l.j0 + 1;
    double count = static_cast<double>(l.ni) * static_cast<double>(l.nj);
    if (count > cfg.coefficient_cap)
        throw CapacityError("sample_field: scale " + std::to_string(k) + " needs " + std::to_string(count) +
                            " coefficients, above the configured cap");
    l.omega.assign(static_cast<size_t>(l.ni * l.nj), 0.0);
    return l;
}

}  // namespace detail

inline double coefficient_draw(const FieldModelConfig& cfg, std::uint64_t seed, int k, long i, long j) {
    double u = to_unit(hash_words({seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(j)}));
    return cfg.dist.draw(cfg.sigma(k), u);
}

// Independent draws for every (k, z) whose bump support meets the region.
inline FieldSample sample_field(const FieldModelConfig& cfg, const Rect& region, std::uint64_t seed) {
    cfg.check();
    if (!(region.width() >= 0.0 && region.height() >= 0.0) || !std::isfinite(region.width()) ||
        !std::isfinite(region.height()))
        throw DomainError("sample_field: region must be a bounded rectangle");
    FieldSample s;
    s.seed = seed;
    s.region = region;
    for (int k = 0; k <= cfg.k_max; ++k) {
        ScaleLayer l = detail::layer_for(cfg, region, k);
        for (long j = l.j0; j < l.j0 + l.nj; ++j)
            for (long i = l.i0; i < l.i0 + l.ni; ++i) l.ref(i, j) = coefficient_draw(cfg, seed, k, i, j);
        l.build_prefix();
        s.layers.push_back(std::move(l));
    }
    return s;
}

inline FieldSample extremal_sample(const FieldModelConfig& cfg, const Rect& region, int sign) {
    cfg.check();
    FieldSample s;
    s.region = region;
    s.kind = sign > 0 ? "extremal+" : "extremal-";
    for (int k = 0; k <= cfg.k_max; ++k) {
        ScaleLayer l = detail::layer_for(cfg, region, k);
        std::fill(l.omega.begin(), l.omega.end(), cfg.dist.extremal(cfg.sigma(k), sign));
        l.build_prefix();
        s.layers.push_back(std::move(l));
    }
    return s;
}

// Copy keeping only coefficients whose lattice point satisfies keep(k, z); others are zeroed.
inline FieldSample restrict_sample(const FieldSample& in, const std::function<bool(int, Vec2)>& keep,
                                   const std::string& kind) {
    FieldSample s = in;
    s.kind = kind;
    for (auto& l : s.layers) {
        double h = std::ldexp(1.0, -l.k);
        for (long j = l.j0; j < l.j0 + l.nj; ++j)
            for (long i = l.i0; i < l.i0 + l.ni; ++i)
                if (!keep(l.k, Vec2{i * h, j * h})) l.ref(i, j) = 0.0;
        l.build_prefix();
    }
    return s;
}

// B_omega = B_det + mu * sum_k sum_z omega_z^k u(2^k (x - z)); with include_det = false only the random part.
class RandomField : public ScalarField {
public:
    RandomField(std::shared_ptr<const FieldModelConfig> cfg, SamplePtr sample, bool include_det = true)
        : cfg_(std::move(cfg)), sample_(std::move(sample)), det_(cfg_->b_det()), include_det_(include_det) {}

    double value(Vec2 x) const override {
        require(x);
        double v = include_det_ ? det_.value(x) : 0.0;
        return v + cfg_->mu * random_value(x);
    }

    Vec2 gradient(Vec2 x) const override {
        require(x);
        Vec2 g = include_det_ ? det_.gradient(x) : Vec2{};
        const auto& p = cfg_->profile;
        double r = p.support_radius();
        for (const auto& l : sample_->layers) {
            double s = std::ldexp(1.0, l.k);
            double X = s * x.x, Y = s * x.y;
            for (long j = static_cast<long>(std::ceil(Y - r)); j <= static_cast<long>(std::floor(Y + r)); ++j) {
                double wy = p.w(Y - j), dwy = p.dw(Y - j);
                if (wy == 0.0 && dwy == 0.0) continue;
                for (long i = static_cast<long>(std::ceil(X - r)); i <= static_cast<long>(std::floor(X + r)); ++i) {
                    if (!l.has(i, j)) continue;
                    double o = l.at(i, j);
                    g.x += cfg_->mu * o * s * p.dw(X - i) * wy;
                    g.y += cfg_->mu * o * s * p.w(X - i) * dwy;
                }
            }
        }
        return g;
    }

    bool periodic() const override { return false; }

    std::optional<double> integral_x(double a, double b, double x2) const override {
        require({a, x2});
        require({b, x2});
        double v = include_det_ ? *det_.integral_x(a, b, x2) : 0.0;
        double sgn = 1.0;
        if (b < a) { std::swap(a, b); sgn = -1.0; }
        return v + sgn * cfg_->mu * random_line(a, b, x2, true);
    }

    std::optional<double> integral_y(double x1, double a, double b) const override {
        require({x1, a});
        require({x1, b});
        double v = include_det_ ? *det_.integral_y(x1, a, b) : 0.0;
        double sgn = 1.0;
        if (b < a) { std::swap(a, b); sgn = -1.0; }
        return v + sgn * cfg_->mu * random_line(a, b, x1, false);
    }

    const FieldSample& sample() const { return *sample_; }
    const FieldModelConfig& config() const { return *cfg_; }

private:
    void require(Vec2 x) const {
        if (!sample_->region.contains(x, 1e-9))
            throw DomainError("field evaluated outside the sampled region at (" + std::to_string(x.x) + ", " +
                              std::to_string(x.y) + ")");
    }

    double random_value(Vec2 x) const {
        const auto& p = cfg_->profile;
        double r = p.support_radius(), v = 0.0;
        for (const auto& l : sample_->layers) {
            double s = std::ldexp(1.0, l.k);
            double X = s * x.x, Y = s * x.y;
            for (long j = static_cast<long>(std::ceil(Y - r)); j <= static_cast<long>(std::floor(Y + r)); ++j) {
                double wy = p.w(Y - j);
                if (wy == 0.0) continue;
                for (long i = static_cast<long>(std::ceil(X - r)); i <= static_cast<long>(std::floor(X + r)); ++i)
                    if (l.has(i, j)) v += l.at(i, j) * p.w(X - i) * wy;
            }
        }
        return v;
    }

    // Integral over t in [a, b] (a <= b) along a row (horizontal, c = x2) or a column (c = x1).
    double random_line(double a, double b, double c, bool horizontal) const {
        const auto& p = cfg_->profile;
        double r = p.support_radius(), total = 0.0;
        for (const auto& l : sample_->layers) {
            double s = std::ldexp(1.0, l.k), inv = 1.0 / s;
            double A = s * a, B = s * b, C = s * c;
            for (long m = static_cast<long>(std::ceil(C - r)); m <= static_cast<long>(std::floor(C + r)); ++m) {
                double wc = p.w(C - m);
                if (wc == 0.0) continue;
                long lo = static_cast<long>(std::ceil(A - r)), hi = static_cast<long>(std::floor(B + r));
                long flo = static_cast<long>(std::ceil(A + r)), fhi = static_cast<long>(std::floor(B - r));
                if (horizontal) {
                    lo = std::max(lo, l.i0);
                    hi = std::min(hi, l.i0 + l.ni - 1);
                    if (m < l.j0 || m >= l.j0 + l.nj) continue;
                } else {
                    lo = std::max(lo, l.j0);
                    hi = std::min(hi, l.j0 + l.nj - 1);
                    if (m < l.i0 || m >= l.i0 + l.ni) continue;
                }
                auto coef = [&](long n) { return horizontal ? l.at(n, m) : l.at(m, n); };
                auto partial = [&](long n) { return coef(n) * (p.antiderivative(B - n) - p.antiderivative(A - n)); };
                double row = 0.0;
                if (flo <= fhi) {
                    row += horizontal ? l.row_sum(m, std::max(flo, lo), std::min(fhi, hi))
                                      : l.col_sum(m, std::max(flo, lo), std::min(fhi, hi));
                    for (long n = lo; n <= std::min(flo - 1, hi); ++n) row += partial(n);
                    for (long n = std::max(fhi + 1, lo); n <= hi; ++n) row += partial(n);
                } else {
                    for (long n = lo; n <= hi; ++n) row += partial(n);
                }
                total += inv * wc * row;
            }
        }
        return total;
    }

    std::shared_ptr<const FieldModelConfig> cfg_;
    SamplePtr sample_;
    PeriodicField det_;
    bool include_det_;
};

inline double field_value(const std::shared_ptr<const FieldModelConfig>& cfg, const SamplePtr& s, Vec2 x) {
    return RandomField(cfg, s).value(x);
}

inline Vec2 field_gradient(const std::shared_ptr<const FieldModelConfig>& cfg, const SamplePtr& s, Vec2 x) {
    return RandomField(cfg, s).gradient(x);
}

// Sum over k > k_max of sigma_k: sup-norm error of the scale truncation (U <= 1).
inline double truncation_bound(const FieldModelConfig& cfg) {
    double q = std::exp(-cfg.rho);
    return cfg.c_ran * std::exp(-cfg.rho * (cfg.k_max + 1)) / (1.0 - q);
}

// 1D lattice sums of the profile factor: sup_t sum_i |w^(m)(t - i)| for m = 0, 1, 2.
struct ProfileLatticeSums {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
};

inline ProfileLatticeSums profile_lattice_sums(const ProfileSpec& p) {
    ProfileLatticeSums out;
    // plateau ramps of neighbours overlap exactly: peaks |w'| = 3/(4 delta) twice, |w''| = 3/(2 delta^2) twice
    if (p.family == ProfileFamily::plateau) return {1.0, 1.5 / p.delta, 3.0 / (p.delta * p.delta)};
    double r = p.support_radius();
    const int n = 4000;
    for (int q = 0; q < n; ++q) {
        double t = static_cast<double>(q) / n;
        double a = 0.0, b = 0.0, c = 0.0;
        for (long i = static_cast<long>(std::ceil(t - r)); i <= static_cast<long>(std::floor(t + r)); ++i) {
            a += std::abs(p.w(t - i));
            b += std::abs(p.dw(t - i));
            c += std::abs(p.d2w(t - i));
        }
        out.s0 = std::max(out.s0, a);
        out.s1 = std::max(out.s1, b);
        out.s2 = std::max(out.s2, c);
    }
    return out;
}

struct GradientBound {
    double value = 0.0;
    bool finite = true;
};

// sup |grad of sum_z omega_z u(2^k(x - z))| per unit sigma, times 2^-k.
inline double profile_gradient_lattice_bound(const ProfileSpec& p) {
    auto s = profile_lattice_sums(p);
    return std::sqrt(2.0) * s.s0 * s.s1;
}

inline double profile_hessian_lattice_bound(const ProfileSpec& p) {
    auto s = profile_lattice_sums(p);
    return 2.0 * (s.s0 * s.s2 + s.s1 * s.s1);
}

// Bound on ||grad B_ran|| summed over the truncated scales k <= k_max.
inline double random_gradient_bound(const FieldModelConfig& cfg) {
    double L = profile_gradient_lattice_bound(cfg.profile), s = 0.0;
    for (int k = 0; k <= cfg.k_max; ++k) s += cfg.sigma(k) * std::ldexp(1.0, k);
    return cfg.mu * L * s;
}

// Infinite-scale bound mu C_ran L / (1 - 2 e^-rho); infinite unless rho > ln 2.
inline GradientBound random_gradient_series_bound(const FieldModelConfig& cfg) {
    double q = 2.0 * std::exp(-cfg.rho);
    if (q >= 1.0) return {std::numeric_limits<double>::infinity(), false};
    return {cfg.mu * cfg.c_ran * profile_gradient_lattice_bound(cfg.profile) / (1.0 - q), true};
}

// Gradient contribution of the discarded scales; flagged infinite when rho <= ln 2.
inline GradientBound truncation_gradient_bound(const FieldModelConfig& cfg) {
    double q = 2.0 * std::exp(-cfg.rho);
    if (q >= 1.0) return {std::numeric_limits<double>::infinity(), false};
    double L = profile_gradient_lattice_bound(cfg.profile);
    return {cfg.mu * cfg.c_ran * L * std::pow(q, cfg.k_max + 1) / (1.0 - q), true};
}

inline double random_hessian_bound(const FieldModelConfig& cfg) {
    double H = profile_hessian_lattice_bound(cfg.profile), s = 0.0;
    for (int k = 0; k <= cfg.k_max; ++k) s += cfg.sigma(k) * std::ldexp(1.0, 2 * k);
    return cfg.mu * H * s;
}

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double limit = 0.0;
    std::string detail;
    std::optional<Vec2> witness;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }
    const CheckResult* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

inline ValidationReport validate_model(const FieldModelConfig& cfg, int grid_resolution = 32) {
    cfg.check();
    if (grid_resolution < 16) throw DomainError("validate_model: grid resolution must be >= 16 per unit cell");
    ValidationReport rep;
    auto add = [&](std::string name, bool pass, double value, double limit, std::string detail,
                   std::optional<Vec2> w = std::nullopt) {
        rep.checks.push_back({std::move(name), pass, value, limit, std::move(detail), w});
    };

    add("rho_gt_ln2", cfg.rho > std::log(2.0), cfg.rho, std::log(2.0), "decay rate of the scale amplitudes");
    add("K0_gt_3", cfg.K0 > 3.0, cfg.K0, 3.0, "upper field ratio");
    add("mu_in_0_1", cfg.mu > 0.0 && cfg.mu <= 1.0, cfg.mu, 1.0, "randomness strength");
    double d0 = delta0(cfg.profile);
    add("delta_le_delta0", cfg.profile.delta <= d0 * (1.0 + 1e-12), cfg.profile.delta, d0, "profile ramp width");

    auto pb = profile_sum_bounds(cfg.profile, std::max(grid_resolution, 32));
    add("profile_partition", pb.sup_ok && pb.c_u > 0.0, pb.sup_u, 1.0 + pb.tolerance,
        "c_u = " + std::to_string(pb.c_u) + ", sup U = " + std::to_string(pb.sup_u));

    PeriodicField det = cfg.b_det();
    double bmin = 1e300, bmax = -1e300, vmax = 0.0;
    Vec2 wmin, wmax, wv;
    double h = 1.0 / grid_resolution;
    for (int i = 0; i < grid_resolution; ++i)
        for (int j = 0; j < grid_resolution; ++j) {
            Vec2 x{i * h, j * h};
            double b = det.value(x), vv = std::abs(cfg.v.value(x));
            if (b < bmin) { bmin = b; wmin = x; }
            if (b > bmax) { bmax = b; wmax = x; }
            if (vv > vmax) { vmax = vv; wv = x; }
        }
    bool lower = cfg.b0 > 0.0 && bmin >= 2.0 * cfg.b0;
    bool upper = bmax <= (cfg.K0 - 1.0) * cfg.b0;
    std::optional<Vec2> wit;
    if (!lower) wit = wmin;
    else if (!upper) wit = wmax;
    add("detbound", lower && upper, lower ? bmax : bmin, lower ? (cfg.K0 - 1.0) * cfg.b0 : 2.0 * cfg.b0,
        "B_det range [" + std::to_string(bmin) + ", " + std::to_string(bmax) + "]", wit);

    double ssum = cfg.c_ran / (1.0 - std::exp(-cfg.rho));
    add("newcondranb", ssum <= cfg.b0, ssum, cfg.b0, "sum of scale amplitudes");
    add("conV", vmax <= cfg.b0 / 4.0, vmax, cfg.b0 / 4.0, "sup |V|",
        vmax <= cfg.b0 / 4.0 ? std::nullopt : std::optional<Vec2>(wv));

    const auto& d = cfg.dist;
    double sigma0 = cfg.sigma(0);
    if (d.shape == DistShape::beta) {
        double mass = 0.0;
        for (int i = 0; i < 8; ++i)
            mass += quad::gauss_legendre_integrate([&](double y) { return d.unit_density(y); }, i / 8.0, (i + 1) / 8.0,
                                                   std::min(d.power() + 2, 64));
        add("dist_normalized", std::abs(mass - 1.0) < 1e-10, mass, 1.0, "integral of the density");
    } else {
        add("dist_normalized", true, 1.0, 1.0, "point mass");
    }
    double mean = d.mean(sigma0);
    add("dist_mean_zero", std::abs(mean) <= 1e-12 * std::max(sigma0, 1e-300), mean, 0.0, "mean of the scale-0 law");
    add("dist_support", d.m_minus(sigma0) >= -sigma0 * (1 + 1e-12) && d.m_plus(sigma0) <= sigma0 * (1 + 1e-12),
        d.m_plus(sigma0), sigma0, "support inside [-sigma, sigma]");
    // integral |v_k''| <= C e^{2 rho k} is scale-free for this family: check the normalized constant.
    double c2 = d.second_derivative_mass(sigma0);
    add("dist_second_derivative", c2 <= d.c2, c2, d.c2, "integral of |v''| at scale 0 (C e^{2 rho k} scaling is exact)");
    double worst = 0.0;
    if (d.shape == DistShape::beta) {
        double w = d.width(sigma0);
        for (int q = 1; q <= 200; ++q) {
            double hh = w * q / 200.0;
            double ratio = std::max(tail_probability(d, sigma0, +1, hh), tail_probability(d, sigma0, -1, hh)) /
                           std::pow(hh, d.tau);
            worst = std::max(worst, ratio);
        }
    } else {
        worst = std::numeric_limits<double>::infinity();
    }
    add("dist_tail", worst <= d.c_v, worst, d.c_v, "sup nu(h)/h^tau on the support");
    return rep;
}

}  // namespace magloc

#endif
