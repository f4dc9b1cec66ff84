#include <catch_amalgamated.hpp>

#include <magloc/quadrature.hpp>
#include <magloc/special.hpp>
#include <magloc/field_model.hpp>
#include <magloc/config_io.hpp>
#include <magloc/gauge.hpp>

using namespace magloc;
using Catch::Approx;

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    for (int n = 1; n <= 12; ++n) {
        int deg = 2 * n - 1;
        double v = quad::gauss_legendre_integrate([&](double x) { return std::pow(x, deg) + std::pow(x, deg - 1); }, 0.0, 1.0, n);
        CHECK(v == Approx(1.0 / (deg + 1) + 1.0 / deg).epsilon(1e-13));
    }
}

TEST_CASE("tanh-sinh handles endpoint singularity") {
    auto r = quad::tanh_sinh_01([](double t) { return cplx(1.0 / std::sqrt(t), 0.0); });
    CHECK(r.value.real() == Approx(2.0).epsilon(1e-12));
    auto r2 = quad::tanh_sinh_01([](double t) { return cplx(std::log(t), 0.0); });
    CHECK(r2.value.real() == Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("exp-sinh on the half-line") {
    auto r = quad::exp_sinh_1inf([](double t) { return cplx(std::exp(-t), 0.0); });
    CHECK(r.value.real() == Approx(std::exp(-1.0)).epsilon(1e-12));
    auto r2 = quad::exp_sinh_1inf([](double t) { return cplx(1.0 / (t * t), 0.0); });
    CHECK(r2.value.real() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adaptive Gauss-Kronrod reports failure with the segment") {
    CHECK(quad::adaptive_gk([](double x) { return std::sin(x); }, 0.0, pi) == Approx(2.0).epsilon(1e-12));
    try {
        quad::adaptive_gk([](double x) { return 1.0 / std::abs(x - 0.3); }, 0.0, 1.0, 1e-12);
        FAIL("expected QuadratureError");
    } catch (const QuadratureError& e) {
        CHECK(e.a == 0.0);
        CHECK(e.b == 1.0);
    }
}
