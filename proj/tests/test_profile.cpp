#include <catch_amalgamated.hpp>

#include <magloc/profile.hpp>

using namespace magloc;
using Catch::Approx;

TEST_CASE("plateau profile values") {
    ProfileSpec p{ProfileFamily::plateau, 0.1};
    CHECK(profile_value(p, {0.3, 0.0}) == 1.0);
    CHECK(profile_value(p, {0.7, 0.0}) == 0.0);
    CHECK(profile_value(p, {0.5, 0.0}) == Approx(0.5).epsilon(1e-15));
    CHECK(profile_value(p, {0.6, 0.6}) == 0.0);
}

TEST_CASE("profile values stay in [0,1] and are C1 across the ramp joins") {
    for (auto p : {ProfileSpec{ProfileFamily::plateau, 0.1}, ProfileSpec{ProfileFamily::scaled_bump, 0.3}}) {
        double r = p.support_radius();
        for (int i = -400; i <= 400; ++i) {
            double t = r * i / 380.0;
            CHECK(p.w(t) >= 0.0);
            CHECK(p.w(t) <= 1.0);
        }
        std::vector<double> joins = p.family == ProfileFamily::plateau ? std::vector<double>{0.4, 0.6, -0.4, -0.6}
                                                                       : std::vector<double>{r, -r};
        for (double j : joins) {
            double e = 1e-9;
            CHECK(std::abs(p.w(j + e) - p.w(j - e)) < 1e-7);
            CHECK(std::abs(p.dw(j + e) - p.dw(j - e)) < 1e-6);
        }
    }
}

TEST_CASE("derivative and antiderivative are consistent with w") {
    for (auto p : {ProfileSpec{ProfileFamily::plateau, 0.15}, ProfileSpec{ProfileFamily::scaled_bump, 0.4}}) {
        double r = p.support_radius();
        for (int i = -50; i <= 50; ++i) {
            double t = r * i / 47.3, e = 1e-5;
            CHECK(p.dw(t) == Approx((p.w(t + e) - p.w(t - e)) / (2 * e)).margin(1e-6 * (1 + std::abs(p.d2w(t)))));
            CHECK(p.w(t) == Approx((p.antiderivative(t + e) - p.antiderivative(t - e)) / (2 * e)).margin(1e-8));
        }
        CHECK(p.antiderivative(-r - 1) == Approx(0.0).margin(1e-15));
        CHECK(p.antiderivative(r + 1) == Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("plateau lattice sum is a partition of unity") {
    ProfileSpec p{ProfileFamily::plateau, 0.1};
    auto b = profile_sum_bounds(p, 64);
    CHECK(b.c_u == Approx(1.0).epsilon(1e-12));
    CHECK(b.sup_u == Approx(1.0).epsilon(1e-12));
    CHECK(b.sup_ok);
    CHECK(profile_sum(p, {0.37, 0.91}) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("lattice sum is Z^2 periodic") {
    for (auto p : {ProfileSpec{ProfileFamily::plateau, 0.2}, ProfileSpec{ProfileFamily::scaled_bump, 0.3}}) {
        Vec2 x{0.123, -0.456};
        CHECK(profile_sum(p, x) == Approx(profile_sum(p, x + Vec2{1, 0})).epsilon(1e-13));
        CHECK(profile_sum(p, x) == Approx(profile_sum(p, x + Vec2{0, -3})).epsilon(1e-13));
    }
}

TEST_CASE("scaled bump lattice sum bounded below") {
    ProfileSpec p{ProfileFamily::scaled_bump, 0.05};
    auto b = profile_sum_bounds(p, 32);
    CHECK(b.c_u > 0.5);
    CHECK(b.scan_max < 1.001);
}

TEST_CASE("delta0 thresholds") {
    CHECK(delta0({ProfileFamily::plateau, 0.1}) == 1.0 / 3200.0);
    double g = bump_gradient_sup();
    CHECK(g > 1.0);
    CHECK(delta0({ProfileFamily::scaled_bump, 0.1}) == Approx(1.0 / (640.0 + 32.0 * g * g)));
}
