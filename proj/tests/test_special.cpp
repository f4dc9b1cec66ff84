#include <catch_amalgamated.hpp>

#include <magloc/special.hpp>

#include "oracles.hpp"

using namespace magloc;
using Catch::Approx;

TEST_CASE("gamma at known points") {
    CHECK(std::abs(gamma_fn(1.0) - 1.0) < 1e-13);
    CHECK(std::abs(gamma_fn(0.5) - std::sqrt(pi)) < 1e-13);
    CHECK(std::abs(gamma_fn(5.0) - 24.0) < 24.0 * 1e-13);
    CHECK(std::abs(gamma_fn(-0.5) - (-2.0 * std::sqrt(pi))) < 1e-12);
}

TEST_CASE("gamma matches the shift-and-Stirling oracle") {
    cplx w(2.5, 1.3);
    cplx ref = oracle::gamma_shift_stirling(w);
    CHECK(std::abs(gamma_fn(w) - ref) / std::abs(ref) < 1e-10);
    // frozen oracle value
    CHECK(std::abs(ref - cplx(0.49165633901835104, 0.75282593348509702)) < 1e-12);
    for (cplx z : {cplx(0.7, -2.0), cplx(3.3, 0.1), cplx(-1.4, 0.6), cplx(-3.5, -0.25), cplx(0.5, 4.0)}) {
        cplx r = oracle::gamma_shift_stirling(z);
        CHECK(std::abs(gamma_fn(z) - r) / std::abs(r) < 1e-12);
    }
}

TEST_CASE("gamma reflection identity") {
    for (cplx w : {cplx(0.3, 0.2), cplx(-2.7, 0.4), cplx(0.1, -1.5)}) {
        cplx lhs = gamma_fn(w) * gamma_fn(1.0 - w);
        cplx rhs = pi / std::sin(pi * w);
        CHECK(std::abs(lhs - rhs) / std::abs(rhs) < 1e-12);
    }
}

TEST_CASE("gamma signals pole proximity with the distance") {
    try {
        gamma_fn(cplx(-2.0 + 1e-9, 0.0));
        FAIL("expected PoleError");
    } catch (const PoleError& e) {
        CHECK(e.distance == Approx(1e-9).epsilon(1e-3));
    }
    CHECK_NOTHROW(gamma_fn(cplx(-2.0 + 1e-3, 0.0)));
}

TEST_CASE("laguerre recurrence") {
    CHECK(laguerre(0, 3.0) == 1.0);
    CHECK(laguerre(1, 0.4) == Approx(0.6));
    CHECK(laguerre(2, 1.5) == Approx(0.5 * (1.5 * 1.5 - 4 * 1.5 + 2)));
    CHECK(laguerre(3, 2.0) == Approx((-8.0 + 9 * 4.0 - 18 * 2.0 + 6) / 6.0));
}
