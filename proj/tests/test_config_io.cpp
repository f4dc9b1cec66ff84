#include <catch_amalgamated.hpp>

#include <magloc/config_io.hpp>

using namespace magloc;

TEST_CASE("config round trip") {
    json j = json::parse(R"({
      "model": {"b0": 5, "B0": 10, "mu": 0.5, "rho": 1.0, "c_ran": 1.0, "k_max": 2, "K0": 4},
      "profile": {"family": "plateau", "delta": 0.1},
      "dist": {"tau": 3, "c_v": 10, "shape": "beta"},
      "fields": {"b_var": {"const": 0, "terms": [{"amp": 0.2, "fx": "sin", "kx": 1}]}, "v": "zero"}
    })");
    auto c = config_from_json(j);
    CHECK(c.k_max == 2);
    CHECK(c.b_var.terms().size() == 1);
    CHECK(c.b_var.value({0.25, 0.0}) == Catch::Approx(0.2));
    auto c2 = config_from_json(config_to_json(c));
    CHECK(config_to_json(c2).dump() == config_to_json(c).dump());
}

TEST_CASE("malformed configs are rejected") {
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"model": {"B0": -1}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"model": {"bogus": 1}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"profile": {"family": "round"}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"fields": {"v": {"terms": [{"fx": "tan"}]}}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"model": {"mu": "a lot"}})")), ConfigError);
}

TEST_CASE("sample dump has k, z, omega entries") {
    FieldModelConfig c;
    c.k_max = 0;
    auto s = sample_field(c, {{0, 0}, {1, 1}}, 3);
    json d = sample_to_json(s);
    CHECK(d["coefficients"].size() == s.coefficient_count());
    CHECK(d["coefficients"][0].contains("k"));
    CHECK(d["coefficients"][0]["z"].size() == 2);
    CHECK(d["coefficients"][0].contains("omega"));
}
