#ifndef MAGLOC_SPECIAL_HPP
#define MAGLOC_SPECIAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

#include "core.hpp"

namespace magloc {

namespace detail {

// Lanczos coefficients, g = 7, n = 9.
inline constexpr double lanczos_g = 7.0;
inline constexpr std::array<double, 9> lanczos_c = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

inline cplx lanczos_log_gamma(cplx w) {
    // valid for Re w >= 1/2
    cplx z = w - 1.0;
    cplx x = lanczos_c[0];
    for (int i = 1; i < 9; ++i) x += lanczos_c[i] / (z + static_cast<double>(i));
    cplx t = z + lanczos_g + 0.5;
    return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace detail

inline double pole_distance(cplx w) {
    double nearest = std::min(0.0, std::round(w.real()));
    return std::abs(w - cplx(nearest, 0.0));
}

// Complex Gamma. Throws PoleError when w lies within `exclusion` of a nonpositive integer.
inline cplx gamma_fn(cplx w, double exclusion = 5e-7) {
    if (w.real() < 0.5) {
        double d = pole_distance(w);
        if (d < exclusion) throw PoleError("gamma_fn: argument too close to a pole", d);
        cplx s = std::sin(pi * w);
        return pi / (s * std::exp(detail::lanczos_log_gamma(1.0 - w)));
    }
    return std::exp(detail::lanczos_log_gamma(w));
}

inline cplx log_gamma(cplx w) {
    if (w.real() < 0.5) return std::log(pi / std::sin(pi * w)) - detail::lanczos_log_gamma(1.0 - w);
    return detail::lanczos_log_gamma(w);
}

// Laguerre polynomial L_n(x) by the three-term recurrence.
inline double laguerre(int n, double x) {
    if (n == 0) return 1.0;
    double l0 = 1.0, l1 = 1.0 - x;
    for (int k = 1; k < n; ++k) {
        double l2 = ((2.0 * k + 1.0 - x) * l1 - k * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    return l1;
}

}  // namespace magloc

#endif
