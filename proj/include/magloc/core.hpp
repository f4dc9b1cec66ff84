#ifndef MAGLOC_CORE_HPP
#define MAGLOC_CORE_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace magloc {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr const char* version = "0.3.0";

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double norm_inf() const { return std::max(std::abs(x), std::abs(y)); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

// Axis-aligned closed rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Rect {
    Vec2 lo;
    Vec2 hi;

    static Rect centered(Vec2 c, double half) { return {{c.x - half, c.y - half}, {c.x + half, c.y + half}}; }
    bool contains(Vec2 p, double slack = 0.0) const {
        return p.x >= lo.x - slack && p.x <= hi.x + slack && p.y >= lo.y - slack && p.y <= hi.y + slack;
    }
    Rect expanded(double r) const { return {{lo.x - r, lo.y - r}, {hi.x + r, hi.y + r}}; }
    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed configuration or user input.
struct ConfigError : Error {
    using Error::Error;
};

// Violated precondition (point outside a sampled region, h < 0, ...).
struct DomainError : Error {
    using Error::Error;
};

struct CapacityError : Error {
    using Error::Error;
};

struct PoleError : Error {
    double distance;
    PoleError(const std::string& what, double d) : Error(what), distance(d) {}
};

struct QuadratureError : Error {
    double a, b;
    QuadratureError(const std::string& what, double a_, double b_) : Error(what), a(a_), b(b_) {}
};

struct SolverError : Error {
    double distance = std::numeric_limits<double>::quiet_NaN();
    using Error::Error;
    SolverError(const std::string& what, double d) : Error(what), distance(d) {}
};

}  // namespace magloc

#endif
