#include <catch_amalgamated.hpp>

#include <magloc/band_structure.hpp>

using namespace magloc;
using Catch::Approx;

static FieldModelConfig plateau_config(double delta = 0.1) {
    FieldModelConfig c;
    c.B0 = 10.0;
    c.b0 = 5.0;
    c.mu = 0.5;
    c.k_max = 2;
    c.profile = {ProfileFamily::plateau, delta};
    return c;
}

TEST_CASE("classical edges of simple fields") {
    PeriodicField zero(0.0);
    auto a = classical_edges(PeriodicField(1.0), zero, 2);
    CHECK(a.e_min == 5.0);
    CHECK(a.e_max == 5.0);
    CHECK(a.margin == 0.0);

    auto b = classical_edges(PeriodicField(1.0), PeriodicField(0.0, {{0.1, Trig::cos, 1, Trig::one, 0}}), 0);
    CHECK(b.e_min == Approx(0.9).epsilon(1e-14));
    CHECK(b.e_max == Approx(1.1).epsilon(1e-14));

    auto c = classical_edges(PeriodicField(1.0, {{0.2, Trig::sin, 1, Trig::sin, 1}}), zero, 1);
    CHECK(c.e_min == Approx(2.4).epsilon(1e-14));
    CHECK(c.e_max == Approx(3.6).epsilon(1e-14));
    CHECK(c.margin > 0.0);
}

TEST_CASE("classical edges are monotone under grid refinement and margins cover the truth") {
    PeriodicField B(2.0, {{0.3, Trig::sin, 1, Trig::cos, 1}, {0.05, Trig::cos, 3, Trig::one, 0}});
    PeriodicField V(0.0, {{0.07, Trig::sin, 2, Trig::sin, 1}});
    auto fine = classical_edges(B, V, 1, {{0, 0}, {1, 1}}, 1024);
    double prev_max = -1e300, prev_min = 1e300;
    for (int res : {7, 14, 28, 56, 112}) {
        auto e = classical_edges(B, V, 1, {{0, 0}, {1, 1}}, res);
        CHECK(e.e_max >= prev_max);
        CHECK(e.e_min <= prev_min);
        CHECK(e.e_max + e.margin >= fine.e_max);
        CHECK(e.e_min - e.margin <= fine.e_min);
        prev_max = e.e_max;
        prev_min = e.e_min;
    }
}

TEST_CASE("band edges with point masses are the classical edges of B_det") {
    auto c = plateau_config();
    c.dist.shape = DistShape::point;
    c.b_var = PeriodicField(0.0, {{0.5, Trig::cos, 1, Trig::one, 0}});
    auto e = band_edges(c, 1);
    auto d = classical_edges(c.b_det(), c.v, 1);
    CHECK(e.E_minus == d.e_min);
    CHECK(e.E_plus == d.e_max);
}

TEST_CASE("plateau profile gives E_0^+ = B0 + mu sum sigma_k") {
    auto c = plateau_config();
    double s = 0.0;
    for (int k = 0; k <= c.k_max; ++k) s += c.sigma(k);
    auto e = band_edges(c, 0);
    CHECK(e.E_plus == Approx(c.B0 + c.mu * s).epsilon(1e-13));
    CHECK(e.E_minus == Approx(c.B0 - c.mu * s).epsilon(1e-13));
    auto e2 = band_edges(c, 2);
    CHECK(e2.E_plus == Approx(5 * (c.B0 + c.mu * s)).epsilon(1e-13));
    CHECK(e.truncation == Approx(c.mu * truncation_bound(c)));
}

TEST_CASE("widening the coefficient support widens the band") {
    auto narrow = plateau_config(0.2);
    narrow.dist.lo = -0.5;
    narrow.dist.hi = 0.5;
    auto wide = narrow;
    wide.dist.lo = -1.0;
    wide.dist.hi = 1.0;
    auto a = band_edges(narrow, 0), b = band_edges(wide, 0);
    CHECK(b.E_minus < a.E_minus);
    CHECK(b.E_plus > a.E_plus);
}

TEST_CASE("sampled fields sit inside the extremal band edges") {
    auto c = plateau_config(0.2);
    auto cs = std::make_shared<const FieldModelConfig>(c);
    auto e = band_edges(c, 1);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RandomField B(cs, std::make_shared<const FieldSample>(sample_field(c, {{0, 0}, {1, 1}}, seed)));
        auto s = classical_edges(B, c.v, 1);
        CHECK(s.e_min >= e.E_minus - e.margin);
        CHECK(s.e_max <= e.E_plus + e.margin);
    }
}

TEST_CASE("fluctuation constants") {
    auto c = plateau_config(0.2);
    c.dist.shape = DistShape::point;
    auto z = fluctuation_constants(c, 32);
    CHECK(z.K2 == 0.0);
    CHECK(z.K2_plus == 0.0);
    CHECK(z.K3_minus == 0.0);

    auto r = plateau_config(0.2);
    r.b_var = PeriodicField(0.0, {{0.2, Trig::sin, 1, Trig::one, 0}});
    r.v = PeriodicField(0.0, {{0.1, Trig::cos, 1, Trig::cos, 1}});
    auto k = fluctuation_constants(r, 48);
    CHECK(k.K3_plus <= (k.K2_plus) * (k.K2_plus));
    CHECK(k.K3_minus <= (k.K2_minus) * (k.K2_minus));
    CHECK(k.K2 >= k.K2_plus - 1e-12);
    CHECK(k.K2 >= k.K2_minus - 1e-12);
    double series = r.mu * random_gradient_series_bound(r).value;
    CHECK(k.K2 <= r.b_var.gradient_bound() + series + r.v.gradient_bound());
    CHECK(k.grad_v == Approx(0.1 * 2 * pi).epsilon(1e-12));
}

TEST_CASE("forbidden interval for a constant field") {
    PeriodicField B(7.0), V(0.0);
    for (int n : {0, 1, 3}) {
        auto f = forbidden_interval(B, V, 7.0, n, 3.0, 2.0);
        CHECK(f.lower == (2 * n + 1) * 7.0);
        CHECK(f.upper == (2 * n + 3) * 7.0);
        CHECK_FALSE(f.empty);
    }
}

TEST_CASE("forbidden interval with B0=50 and unit sinusoidal fluctuation") {
    double B0 = 50.0;
    PeriodicField B(B0, {{1.0, Trig::sin, 1, Trig::one, 0}}), V(0.0);
    auto f = forbidden_interval(B, V, B0, 0, 1.0, 2.0);
    double K2 = 2 * pi, K3 = 4 * pi * pi;
    double corr = K2 / std::sqrt(B0) + K3 / (B0 * B0);
    CHECK(f.lower == Approx(51.0 + corr).epsilon(1e-12));
    CHECK(f.upper == Approx(147.0 - corr).epsilon(1e-12));
    CHECK(f.lower == Approx(51.904365).epsilon(1e-7));
}

TEST_CASE("forbidden interval approaches the classical edges as B0 grows") {
    double prev = 1e300;
    for (double B0 : {25.0, 100.0, 400.0, 1600.0}) {
        PeriodicField B(B0, {{1.0, Trig::sin, 1, Trig::one, 0}}), V(0.0);
        auto f = forbidden_interval(B, V, B0, 0, 1.0, 2.0);
        double d = f.lower - f.e_max_n;
        CHECK(d < prev);
        prev = d;
    }
    CHECK(prev < 0.16);
}

TEST_CASE("forbidden interval errors and emptiness") {
    PeriodicField B(10.0, {{6.0, Trig::sin, 1, Trig::one, 0}}), V(0.0);
    CHECK_THROWS_AS(forbidden_interval(B, V, 10.0, 0, 1.0, 1.5), DomainError);
    CHECK_THROWS_AS(forbidden_interval(PeriodicField(1.0), V, 1.0, 0, 0.0, 2.0), DomainError);
    auto f = forbidden_interval(B, V, 10.0, 0, 50.0, 10.0);
    CHECK(f.empty);
}

TEST_CASE("band report with zero randomness") {
    auto c = plateau_config();
    c.dist.shape = DistShape::point;
    auto rep = sigma_band_report(c, 3, 1.0, 1.0, 16);
    REQUIRE(rep.bands.size() == 4);
    CHECK(rep.constant_background);
    for (const auto& b : rep.bands) {
        CHECK(b.lower == Approx(c.B0 * (2 * b.n + 1)).epsilon(1e-14));
        CHECK(b.upper == Approx(c.B0 * (2 * b.n + 1)).epsilon(1e-14));
        CHECK(b.gap_above == Approx(2 * c.B0));
    }
    CHECK(rep.first_overlap == -1);
}

TEST_CASE("first overlapping band for widths growing like 2n+1") {
    auto c = plateau_config();
    c.B0 = 6.0;
    c.mu = 1.0;
    double a = 0.0;
    for (int k = 0; k <= c.k_max; ++k) a += c.sigma(k);
    int expect = 0;
    while ((expect + 1) < c.B0 / (2 * a)) ++expect;
    auto rep = sigma_band_report(c, 10, 1.0, 0.0, 16);
    CHECK(rep.first_overlap == expect);

    auto big = plateau_config();
    big.B0 = 400.0;
    auto r2 = sigma_band_report(big, 1, 1.0, 1.0, 16);
    CHECK(r2.first_overlap == -1);
}

TEST_CASE("localization window") {
    auto c = plateau_config();
    c.dist.shape = DistShape::point;
    auto w = localization_window(c, 0, 0.5);
    CHECK_FALSE(w.empty);
    CHECK(w.lo == Approx(c.B0 - 0.5));
    CHECK(w.hi == Approx(3 * c.B0 + 0.5));

    auto o = plateau_config();
    o.B0 = 2.0;
    o.mu = 1.0;
    auto e0 = band_edges(o, 2), e1 = band_edges(o, 3);
    REQUIRE(e1.E_minus < e0.E_plus);
    auto w2 = localization_window(o, 2, 0.01);
    CHECK(w2.empty);
    CHECK(w2.lo == Approx(e0.E_plus - 0.01));
    CHECK(w2.hi == Approx(e1.E_minus + 0.01));
    CHECK_THROWS_AS(localization_window(c, 0, 0.0), DomainError);
}

TEST_CASE("calibration of C_ext") {
    PeriodicField B(50.0, {{1.0, Trig::sin, 1, Trig::one, 0}}), V(0.0);
    auto f = forbidden_interval(B, V, 50.0, 0, 1.0, 2.0);
    double c = calibrate_c_ext(f, f.e_max_n + 0.5 * f.correction, f.e_min_next - 0.25 * f.correction);
    CHECK(c == Approx(0.5));
    CHECK(calibrate_c_ext(f, f.e_max_n - 1.0, f.e_min_next + 1.0) == 0.0);
}
