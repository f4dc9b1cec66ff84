#include <catch_amalgamated.hpp>

#include <cstdlib>

#include <magloc/diagnostics.hpp>

using namespace magloc;
using Catch::Approx;

static FieldModelConfig small_config() {
    FieldModelConfig c;
    c.B0 = 10.0;
    c.b0 = 5.0;
    c.mu = 0.5;
    c.k_max = 1;
    return c;
}

static MCOptions small_options(long trials = 6) {
    MCOptions o;
    o.l = 5.0;
    o.h = 0.25;
    o.trials = trials;
    o.seed = 11;
    return o;
}

TEST_CASE("wilson interval reference values") {
    // closed form at k = 0: hi = z^2 / (n + z^2)
    auto e0 = wilson_estimate(0, 10);
    CHECK(e0.lo == 0.0);
    CHECK(e0.hi == Approx(z95 * z95 / (10 + z95 * z95)).epsilon(1e-12));
    auto e = wilson_estimate(5, 10);  // statsmodels proportion_confint(5, 10, method="wilson")
    CHECK(e.value == 0.5);
    CHECK(e.lo == Approx(0.23659309051256394).epsilon(1e-12));
    CHECK(e.hi == Approx(0.7634069094874361).epsilon(1e-12));
    auto all = wilson_estimate(20, 20, 3);
    CHECK(all.hi == 1.0);
    CHECK(all.failures == 3);
    CHECK(all.lo == Approx(20.0 / (20 + z95 * z95)).epsilon(1e-12));
}

TEST_CASE("mean, ratio and fit helpers") {
    auto m = mean_estimate({1, 2, 3, 4});
    CHECK(m.value == 2.5);
    double se = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0 / 4.0);
    CHECK(m.hi - m.value == Approx(z95 * se));
    auto r = ratio_estimate({2, 4, 6}, {1, 2, 3});
    CHECK(r.value == Approx(2.0));
    CHECK(r.hi - r.lo == Approx(0.0).margin(1e-12));  // exactly proportional pairs
    CHECK_THROWS_AS(ratio_estimate({1}, {0}), DomainError);
    auto f = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.slope == Approx(2.0));
    CHECK(f.intercept == Approx(1.0));
    CHECK(f.r2 == Approx(1.0));
    CHECK_THROWS_AS(least_squares({1, 1}, {0, 1}), DomainError);
}

TEST_CASE("trial runner keeps index order and per-trial errors") {
    for (int w : {1, 3}) {
        auto s = run_trials<long>(20, [](long i) -> long {
            if (i == 7) throw SolverError("boom");
            return i * i;
        }, w);
        REQUIRE(s.size() == 20);
        for (long i = 0; i < 20; ++i) {
            if (i == 7) {
                CHECK_FALSE(s[i].value);
                CHECK(s[i].error.find("boom") != std::string::npos);
            } else {
                CHECK(*s[i].value == i * i);
            }
        }
    }
    CHECK_THROWS_AS(run_trials<int>(3, [](long) -> int { throw std::runtime_error("x"); }, 2), std::runtime_error);
}

TEST_CASE("multiscale parameters") {
    auto p = multiscale_params(0.5, 3.0, 9.0);
    CHECK(p.beta == Approx(1.0 / 12.0));
    CHECK(p.gamma == Approx(std::pow(9.0, 1.0 / 12.0 - 1.0)));
    CHECK_THROWS_AS(multiscale_params(1.5, 3.0, 9.0), DomainError);
    CHECK_THROWS_AS(multiscale_params(0.5, 2.0, 9.0), DomainError);
}

TEST_CASE("Landau trial states are normalized and guarded") {
    double B = 4.0, l = 8.0;
    LineIntegralGauge A(std::make_shared<const PeriodicField>(B), {0, 0});
    auto d = assemble({{0, 0}, l, 2}, A, PeriodicField(0.0), l / 160);
    for (int n : {0, 1, 2}) {
        auto t = trial_state(n, {0, 0}, B, d);
        CHECK(t.discrete_norm == Approx(1.0).epsilon(1e-6));
        double s = t.psi.squaredNorm() * d.h() * d.h();
        CHECK(s == Approx(1.0).epsilon(1e-12));
        // Rayleigh quotient near (2n+1) B
        double rq = t.psi.dot(d.H * t.psi).real() * d.h() * d.h();
        CHECK(rq == Approx((2 * n + 1) * B).epsilon(5e-3));
    }
    auto coarse = assemble({{0, 0}, l, 2}, A, PeriodicField(0.0), l / 8);
    CHECK_THROWS_AS(trial_state(0, {0, 0}, B, coarse), DomainError);
    CHECK_THROWS_AS(trial_state(0, {3.0, 0}, B, d), DomainError);
}

TEST_CASE("trial residual scan behaviour") {
    PeriodicField flat(0.0), V(0.0);
    SECTION("constant field sits at the discretization floor") {
        auto s = trial_residual_scan(flat, V, 0, {25.0}, {0, 0}, 0.0, 160);
        CHECK(s.points[0].residual < 1e-3);
        CHECK_FALSE(s.points[0].usable);
    }
    SECTION("shifting lambda by one gives residual one") {
        auto s = trial_residual_scan(flat, V, 1, {25.0}, {0, 0}, 1.0, 160);
        CHECK(s.points[0].residual == Approx(1.0).epsilon(1e-3));
        CHECK(s.points[0].usable);
    }
    SECTION("varying field gives a resolvable residual") {
        PeriodicField b(0.0, {{0.2, Trig::sin, 1, Trig::one, 0}});
        auto s = trial_residual_scan(b, V, 0, {25.0, 50.0}, {0, 0}, 0.0, 160);
        for (const auto& p : s.points) {
            CHECK(p.usable);
            CHECK(p.residual > 0.0);
        }
        REQUIRE(s.fit);
    }
}

TEST_CASE("wegner counts nest in eta and are reproducible") {
    auto cfg = small_config();
    auto o = small_options();
    std::vector<double> etas{0.25, 0.5, 1.0};
    auto a = wegner_mc(cfg, 20.0, etas, o);
    auto b = wegner_mc(cfg, 20.0, etas, o);
    REQUIRE(a.records.size() == 3);
    for (size_t t = 0; t < a.counts.size(); ++t) {
        REQUIRE(a.counts[t].size() == 3);
        CHECK(a.counts[t] == b.counts[t]);
        CHECK(a.counts[t][0] <= a.counts[t][1]);
        CHECK(a.counts[t][1] <= a.counts[t][2]);
    }
    CHECK(a.records[0].config_hash == config_hash(cfg));
    CHECK_THROWS_AS(wegner_mc(cfg, 20.0, {1.5}, o), DomainError);
    CHECK_THROWS_AS(wegner_mc(cfg, 1.0, {0.5}, o), DomainError);
}

TEST_CASE("worker count does not change results") {
    auto cfg = small_config();
    auto o = small_options(5);
    o.workers = 1;
    auto a = wegner_mc(cfg, 18.0, {0.5}, o);
    o.workers = 3;
    auto b = wegner_mc(cfg, 18.0, {0.5}, o);
    CHECK(a.counts == b.counts);
}

TEST_CASE("good box probability decreases with gamma") {
    auto cfg = small_config();
    auto o = small_options(6);
    auto g = good_box_mc(cfg, 20.0, {0.1, 0.5, 2.0}, o);
    REQUIRE(g.records.size() == 3);
    CHECK(g.records[0].estimate.value >= g.records[1].estimate.value);
    CHECK(g.records[1].estimate.value >= g.records[2].estimate.value);
    for (double v : g.norms) CHECK((v > 0.0 || std::isinf(v)));
    auto bad = o;
    bad.l = 6.0;
    CHECK_THROWS_AS(good_box_mc(cfg, 20.0, {0.1}, bad), DomainError);
}

TEST_CASE("balanced run produces consistent indicators") {
    auto cfg = small_config();
    auto o = small_options(3);
    auto r = balanced_mc(cfg, 20.0, 3, 1.0, 1.0, o);
    CHECK(r.single.estimate.trials + r.single.estimate.failures == 3);
    CHECK(r.pair.estimate.value >= r.single.estimate.value);
    CHECK_THROWS_AS(balanced_mc(cfg, 20.0, 2, 1.0, 1.0, o), DomainError);
}

TEST_CASE("lifshitz bound and windows") {
    auto cfg = small_config();
    cfg.B0 = 20.0;
    cfg.b0 = 10.0;
    cfg.c_ran = 0.5;
    auto o = small_options(3);
    o.l = 3.0;
    o.h = 0.2;
    std::vector<double> hs{0.05, 0.2};
    auto r = lifshitz_tail_mc(cfg, 0, hs, 1.0, 1, o);
    REQUIRE(r.points.size() == 2);
    CHECK(r.lambda_tilde == 49.0);
    for (const auto& p : r.points) {
        double nu = tail_probability(cfg.dist, cfg.sigma(0), 1, p.h / r.c_u) + tail_probability(cfg.dist, cfg.sigma(0), -1, p.h / r.c_u);
        CHECK(p.bound == Approx(1.0 - 49.0 * nu));
        CHECK(p.vacuous == (p.bound <= 0.0));
        CHECK(p.window_lo == Approx(r.interval.lower - cfg.mu * p.h));
        CHECK(p.window_hi == Approx(r.interval.upper + 3.0 * cfg.mu * p.h));
        CHECK(p.record.estimate.trials == 3);
    }
    CHECK(r.points[0].bound >= r.points[1].bound);
}

TEST_CASE("Combes-Thomas fit on a constant-field torus") {
    double B = 2.0, L = std::sqrt(2.0 * pi * 12.0 / B);
    auto d = assemble_torus(L, B, PeriodicField(0.0), L / 48);
    auto spec = full_spectrum(d).values;
    double top = *std::max_element(spec.begin(), spec.end());
    (void)top;
    auto f = combes_thomas_fit(d, 2.0 * B, 1.05 * B, 2.9 * B, {1.5, 2.0, 2.5, 3.0}, {L / 2, L / 2}, 0.3);
    CHECK(f.rate > 0.0);
    CHECK(f.r2 > 0.8);
    for (size_t i = 1; i < f.norms.size(); ++i) CHECK(f.norms[i] < f.norms[i - 1]);
    CHECK_THROWS_AS(combes_thomas_fit(d, B, 0.5 * B, 1.5 * B, {1.0, 2.0}, {L / 2, L / 2}, 0.3), DomainError);
    CHECK(combes_thomas_form_ratio(f, f) == Approx(1.0));
}

TEST_CASE("localization length of a synthetic exponential") {
    Grid g{{-5, -5}, 0.1, 99, false};
    VecC psi(g.size());
    for (long a = 0; a < g.size(); ++a) psi[a] = std::exp(-0.8 * g.point(a).norm());
    auto r = localization_length(psi, g, 0.2);
    CHECK(r.rate == Approx(0.8).epsilon(0.05));
    CHECK(r.r2 > 0.99);
    CHECK(r.participation > 0.0);
}

TEST_CASE("IDS is nondecreasing in energy") {
    auto cfg = small_config();
    auto o = small_options(3);
    std::vector<double> es{5, 10, 20, 30, 40};
    auto r = ids_histogram(cfg, es, o);
    REQUIRE(r.density.size() == es.size());
    for (const auto& row : r.per_trial)
        for (size_t k = 1; k < row.size(); ++k) CHECK(row[k] >= row[k - 1]);
}

TEST_CASE("Landau discretization budget shrinks like h^2") {
    double a = landau_discretization_budget(0, 10.0, 10.0, 0.2, 1);
    double b = landau_discretization_budget(0, 10.0, 10.0, 0.1, 1);
    CHECK(a > 0.0);
    CHECK(a / b == Approx(4.0).margin(0.5));
    // the range covers its ends
    CHECK(landau_discretization_budget(0, 8.0, 10.0, 0.2, 3) >= a);
    CHECK(landau_discretization_budget(1, 10.0, 10.0, 0.2, 1) > a);
    CHECK_THROWS_AS(landau_discretization_budget(0, 0.0, 1.0, 0.2), DomainError);
}
