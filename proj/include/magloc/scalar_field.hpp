#ifndef MAGLOC_SCALAR_FIELD_HPP
#define MAGLOC_SCALAR_FIELD_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace magloc {

class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual double value(Vec2 x) const = 0;
    virtual Vec2 gradient(Vec2 x) const = 0;
    virtual bool periodic() const { return false; }
    // Exact integrals along axis-parallel segments, when the field knows them.
    virtual std::optional<double> integral_x(double, double, double) const { return std::nullopt; }
    virtual std::optional<double> integral_y(double, double, double) const { return std::nullopt; }
};

using FieldPtr = std::shared_ptr<const ScalarField>;

enum class Trig { one, cos, sin };

struct TrigTerm {
    double amp = 0.0;
    Trig fx = Trig::one;
    int kx = 0;
    Trig fy = Trig::one;
    int ky = 0;
};

// c + sum amp * fx(2 pi kx x1) * fy(2 pi ky x2); Z^2-periodic for integer k.
class PeriodicField : public ScalarField {
public:
    PeriodicField() = default;
    explicit PeriodicField(double c, std::vector<TrigTerm> terms = {}) : c_(c), terms_(std::move(terms)) {}

    static double f(Trig t, int k, double s) {
        switch (t) {
            case Trig::one: return 1.0;
            case Trig::cos: return std::cos(2.0 * pi * k * s);
            case Trig::sin: return std::sin(2.0 * pi * k * s);
        }
        return 0.0;
    }
    static double df(Trig t, int k, double s) {
        switch (t) {
            case Trig::one: return 0.0;
            case Trig::cos: return -2.0 * pi * k * std::sin(2.0 * pi * k * s);
            case Trig::sin: return 2.0 * pi * k * std::cos(2.0 * pi * k * s);
        }
        return 0.0;
    }
    static double antideriv_diff(Trig t, int k, double a, double b) {
        if (t == Trig::one || (t == Trig::cos && k == 0)) return b - a;
        if (k == 0) return 0.0;
        double w = 2.0 * pi * k;
        if (t == Trig::cos) return (std::sin(w * b) - std::sin(w * a)) / w;
        return -(std::cos(w * b) - std::cos(w * a)) / w;
    }

    double value(Vec2 x) const override {
        double v = c_;
        for (const auto& t : terms_) v += t.amp * f(t.fx, t.kx, x.x) * f(t.fy, t.ky, x.y);
        return v;
    }
    Vec2 gradient(Vec2 x) const override {
        Vec2 g;
        for (const auto& t : terms_) {
            g.x += t.amp * df(t.fx, t.kx, x.x) * f(t.fy, t.ky, x.y);
            g.y += t.amp * f(t.fx, t.kx, x.x) * df(t.fy, t.ky, x.y);
        }
        return g;
    }
    bool periodic() const override { return true; }
    std::optional<double> integral_x(double a, double b, double x2) const override {
        double v = c_ * (b - a);
        for (const auto& t : terms_) v += t.amp * antideriv_diff(t.fx, t.kx, a, b) * f(t.fy, t.ky, x2);
        return v;
    }
    std::optional<double> integral_y(double x1, double a, double b) const override {
        double v = c_ * (b - a);
        for (const auto& t : terms_) v += t.amp * f(t.fx, t.kx, x1) * antideriv_diff(t.fy, t.ky, a, b);
        return v;
    }

    double constant() const { return c_; }
    const std::vector<TrigTerm>& terms() const { return terms_; }
    bool is_constant() const {
        auto flat = [](Trig t, int k) { return t == Trig::one || (t == Trig::cos && k == 0); };
        auto vanishes = [](Trig t, int k) { return t == Trig::sin && k == 0; };
        for (const auto& t : terms_) {
            if (t.amp == 0.0 || vanishes(t.fx, t.kx) || vanishes(t.fy, t.ky)) continue;
            if (!flat(t.fx, t.kx) || !flat(t.fy, t.ky)) return false;
        }
        return true;
    }
    // Bounds on |f|, |grad f| and the spectral norm of the Hessian.
    double sup_abs_bound() const {
        double s = std::abs(c_);
        for (const auto& t : terms_) s += std::abs(t.amp);
        return s;
    }
    double gradient_bound() const {
        double s = 0.0;
        for (const auto& t : terms_) {
            double gx = t.fx == Trig::one ? 0.0 : 2.0 * pi * std::abs(t.kx);
            double gy = t.fy == Trig::one ? 0.0 : 2.0 * pi * std::abs(t.ky);
            s += std::abs(t.amp) * std::hypot(gx, gy);
        }
        return s;
    }
    double hessian_bound() const {
        double s = 0.0;
        for (const auto& t : terms_) {
            double gx = t.fx == Trig::one ? 0.0 : 2.0 * pi * std::abs(t.kx);
            double gy = t.fy == Trig::one ? 0.0 : 2.0 * pi * std::abs(t.ky);
            s += std::abs(t.amp) * (gx + gy) * (gx + gy);
        }
        return s;
    }

    PeriodicField plus_constant(double d) const { return PeriodicField(c_ + d, terms_); }

private:
    double c_ = 0.0;
    std::vector<TrigTerm> terms_;
};

// Field from callables; used for generic inputs that have no closed-form integrals.
class FunctionField : public ScalarField {
public:
    FunctionField(std::function<double(Vec2)> v, std::function<Vec2(Vec2)> g) : v_(std::move(v)), g_(std::move(g)) {}
    double value(Vec2 x) const override { return v_(x); }
    Vec2 gradient(Vec2 x) const override { return g_(x); }

private:
    std::function<double(Vec2)> v_;
    std::function<Vec2(Vec2)> g_;
};

}  // namespace magloc

#endif
