#ifndef MAGLOC_GAUGE_HPP
#define MAGLOC_GAUGE_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"
#include "field_model.hpp"
#include "quadrature.hpp"
#include "scalar_field.hpp"

namespace magloc {

enum class GaugeFamily { zero, symmetric, line_integral, subordinate, transformed };

inline const char* gauge_family_name(GaugeFamily f) {
    switch (f) {
        case GaugeFamily::zero: return "zero";
        case GaugeFamily::symmetric: return "symmetric";
        case GaugeFamily::line_integral: return "line-integral";
        case GaugeFamily::subordinate: return "subordinate";
        case GaugeFamily::transformed: return "transformed";
    }
    return "?";
}

class VectorPotential {
public:
    virtual ~VectorPotential() = default;
    virtual Vec2 value(Vec2 x) const = 0;
    virtual GaugeFamily family() const = 0;
    virtual Vec2 base() const { return {}; }
    virtual double tolerance() const { return 0.0; }
};

using PotentialPtr = std::shared_ptr<const VectorPotential>;

class ZeroPotential : public VectorPotential {
public:
    Vec2 value(Vec2) const override { return {}; }
    GaugeFamily family() const override { return GaugeFamily::zero; }
};

class SymmetricGauge : public VectorPotential {
public:
    SymmetricGauge(double B0, Vec2 u) : B0_(B0), u_(u) {}
    Vec2 value(Vec2 x) const override { return {-0.5 * B0_ * (x.y - u_.y), 0.5 * B0_ * (x.x - u_.x)}; }
    GaugeFamily family() const override { return GaugeFamily::symmetric; }
    Vec2 base() const override { return u_; }

private:
    double B0_;
    Vec2 u_;
};

// A(x) = (-1/2 int_{u2}^{x2} B(x1, s) ds, 1/2 int_{u1}^{x1} B(s, x2) ds).
class LineIntegralGauge : public VectorPotential {
public:
    LineIntegralGauge(FieldPtr B, Vec2 u, double tol = 1e-10) : B_(std::move(B)), u_(u), tol_(tol) {}

    Vec2 value(Vec2 x) const override { return {-0.5 * column(x.x, u_.y, x.y), 0.5 * row(u_.x, x.x, x.y)}; }
    GaugeFamily family() const override { return GaugeFamily::line_integral; }
    Vec2 base() const override { return u_; }
    double tolerance() const override { return tol_; }

private:
    double row(double a, double b, double y) const {
        if (auto v = B_->integral_x(a, b, y)) return *v;
        return quad::adaptive_gk([&](double t) { return B_->value({t, y}); }, a, b, tol_);
    }
    double column(double x, double a, double b) const {
        if (auto v = B_->integral_y(x, a, b)) return *v;
        return quad::adaptive_gk([&](double t) { return B_->value({x, t}); }, a, b, tol_);
    }

    FieldPtr B_;
    Vec2 u_;
    double tol_;
};

// A + grad(lambda).
class TransformedPotential : public VectorPotential {
public:
    TransformedPotential(PotentialPtr A, std::function<Vec2(Vec2)> grad_lambda)
        : A_(std::move(A)), g_(std::move(grad_lambda)) {}
    Vec2 value(Vec2 x) const override { return A_->value(x) + g_(x); }
    GaugeFamily family() const override { return GaugeFamily::transformed; }
    Vec2 base() const override { return A_->base(); }

private:
    PotentialPtr A_;
    std::function<Vec2(Vec2)> g_;
};

// Open square of side l centred at `center`, with the expansion c_delta used for subordinate fields.
struct BoxSpec {
    Vec2 center;
    double l = 9.0;
    int c_delta = 2;

    bool suitable() const {
        double li = std::round(l);
        return std::abs(l - li) < 1e-12 && static_cast<long>(li) % 2 == 1 && std::abs(center.x - std::round(center.x)) < 1e-12 &&
               std::abs(center.y - std::round(center.y)) < 1e-12;
    }
    Rect rect() const { return Rect::centered(center, 0.5 * l); }
    Rect expanded() const { return Rect::centered(center, 0.5 * l + c_delta); }
    double dist_inf(Vec2 x) const { return (x - center).norm_inf(); }
    bool in_box(Vec2 x) const { return dist_inf(x) < 0.5 * l; }
    bool in_expanded(Vec2 x) const { return dist_inf(x) < 0.5 * l + c_delta; }
    bool in_interior(Vec2 x) const { return dist_inf(x) < l / 6.0; }
    bool in_collar(Vec2 x) const { double d = dist_inf(x); return d >= 0.5 * (l - 2.0) && d < 0.5 * l; }
};

class SubordinatePotential : public VectorPotential {
public:
    SubordinatePotential(PotentialPtr full, std::shared_ptr<const LineIntegralGauge> correction, Vec2 base)
        : full_(std::move(full)), corr_(std::move(correction)), base_(base) {}
    Vec2 value(Vec2 x) const override { return full_->value(x) - corr_->value(x); }
    GaugeFamily family() const override { return GaugeFamily::subordinate; }
    Vec2 base() const override { return base_; }
    double tolerance() const override { return corr_->tolerance(); }

private:
    PotentialPtr full_;
    std::shared_ptr<const LineIntegralGauge> corr_;
    Vec2 base_;
};

namespace detail {
inline void require_cover(const FieldSample& s, const BoxSpec& box) {
    Rect e = box.expanded();
    if (!(s.region.contains(e.lo, 1e-9) && s.region.contains(e.hi, 1e-9)))
        throw DomainError("sample region does not cover the expanded box");
}
}  // namespace detail

// Keeps the coefficients with z in the open expanded box.
inline FieldSample subordinate_field(const FieldModelConfig&, const FieldSample& sample, const BoxSpec& box) {
    detail::require_cover(sample, box);
    return restrict_sample(sample, [&](int, Vec2 z) { return box.in_expanded(z); }, "subordinate");
}

inline FieldSample complement_field(const FieldSample& sample, const BoxSpec& box) {
    detail::require_cover(sample, box);
    return restrict_sample(sample, [&](int, Vec2 z) { return !box.in_expanded(z); }, "complement");
}

// A_full minus the line-integral gauge (based at the box centre) of the discarded part of the field.
inline PotentialPtr subordinate_potential(const std::shared_ptr<const FieldModelConfig>& cfg, const FieldSample& sample,
                                          const BoxSpec& box, PotentialPtr A_full, double tol = 1e-10) {
    auto rest = std::make_shared<const FieldSample>(complement_field(sample, box));
    auto dB = std::make_shared<const RandomField>(cfg, rest, false);
    auto corr = std::make_shared<const LineIntegralGauge>(dB, box.center, tol);
    return std::make_shared<const SubordinatePotential>(std::move(A_full), std::move(corr), box.center);
}

// theta = int_p^q A . dl by 3-point Gauss-Legendre on the segment.
inline double peierls_link_phase(const VectorPotential& A, Vec2 p, Vec2 q) {
    static const double off = 0.5 * std::sqrt(0.6);
    Vec2 d = q - p;
    Vec2 a0 = A.value(p + d * (0.5 - off)), a1 = A.value(p + d * 0.5), a2 = A.value(p + d * (0.5 + off));
    return (5.0 * a0.dot(d) + 8.0 * a1.dot(d) + 5.0 * a2.dot(d)) / 18.0;
}

struct CurlSample {
    double x, y, error;
};

struct CurlReport {
    double max_error = 0.0;
    std::vector<CurlSample> samples;
};

// Fourth-order central differences of A against B on an n x n grid over `area`.
inline CurlReport curl_check(const VectorPotential& A, const ScalarField& B, const Rect& area, int n, double eps = 1e-3) {
    CurlReport rep;
    auto d = [&](Vec2 x, Vec2 e, int comp) {
        auto c = [&](Vec2 p) { Vec2 a = A.value(p); return comp == 0 ? a.x : a.y; };
        return (8.0 * (c(x + e * eps) - c(x - e * eps)) - (c(x + e * (2 * eps)) - c(x - e * (2 * eps)))) / (12.0 * eps);
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Vec2 x{area.lo.x + (i + 0.5) * area.width() / n, area.lo.y + (j + 0.5) * area.height() / n};
            double curl = d(x, {1, 0}, 1) - d(x, {0, 1}, 0);
            double err = std::abs(curl - B.value(x));
            rep.samples.push_back({x.x, x.y, err});
            rep.max_error = std::max(rep.max_error, err);
        }
    return rep;
}

}  // namespace magloc

#endif
