#include <cmath>

#include "branching/error.hpp"
#include "branching/model.hpp"
#include "branching/model_json.hpp"
#include "doctest.h"
#include "support/models.hpp"
#include "support/oracle.hpp"

using namespace branching;
using fixtures::load;

namespace {

bool has_violation(const ModelSpec& spec, const std::string& needle) {
  for (const auto& v : validate_model(spec)) {
    if (v.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

ModelSpec spec_of(const char* text) { return parse_model_spec(nlohmann::json::parse(text)); }

}  // namespace

TEST_CASE("validation accepts a proper pmf") {
  CHECK(validate_model(spec_of(fixtures::kBgw)).empty());
}

TEST_CASE("validation reports the pmf sum") {
  const auto spec =
      spec_of(R"({"types": 1, "variant": "bgw", "offspring": [{"0": 0.5, "2": 0.6}]})");
  CHECK(has_violation(spec, "pmf sums to 1.1"));
  CHECK_THROWS_AS(Model{spec}, Error);
  try {
    Model m(spec);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
    CHECK(std::string(e.what()).find("/offspring/0") != std::string::npos);
  }
}

TEST_CASE("validation rejects negative life span mass") {
  const auto spec = spec_of(R"({"types": 1, "variant": "sevastyanov",
    "life_span": {"1": -0.5, "2": 1.5},
    "split": {"1": {"0": 1}, "2": {"0": 1}}})");
  CHECK(has_violation(spec, "negative"));
}

TEST_CASE("validation: splitting models are single-type") {
  auto spec = spec_of(fixtures::kSevastyanov);
  spec.types = 2;
  CHECK(has_violation(spec, "single-type"));
}

TEST_CASE("BGW careers: two children with frequency 3/4, all at age 1") {
  const auto model = load(fixtures::kBgw);
  Stream rng(2024);
  const int n = 100000;
  int twos = 0;
  bool shape = true;
  for (int i = 0; i < n; ++i) {
    const auto c = sample_career(model, 0, rng);
    shape = shape && (c.offspring() == 0 || c.offspring() == 2);
    twos += c.offspring() == 2;
    for (const auto& b : c.births) shape = shape && b.age == 1.0;
    shape = shape && c.life_span == 1.0;
  }
  CHECK(shape);
  const double sigma = std::sqrt(0.75 * 0.25 / n);
  CHECK(std::abs(twos / double(n) - 0.75) < 3 * sigma);
}

TEST_CASE("Sevastyanov careers split at death") {
  const auto model = load(fixtures::kSevastyanov);
  Stream rng(7);
  for (int i = 0; i < 2000; ++i) {
    const auto c = sample_career(model, 0, rng);
    REQUIRE(c.life_span.has_value());
    CHECK((*c.life_span == 1.0 || *c.life_span == 2.0));
    for (const auto& b : c.births) CHECK(b.age == *c.life_span);
  }
}

TEST_CASE("degenerate p_0 = 1 never reproduces") {
  const auto model = load(fixtures::kExtinct);
  Stream rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_career(model, 0, rng).offspring() == 0);
  const auto sev = load(R"({"types": 1, "variant": "sevastyanov",
    "life_span": {"0.5": 0.5, "3": 0.5}, "split": {"0.5": {"0": 1}, "3": {"0": 1}}})");
  for (int i = 0; i < 100; ++i) CHECK(sample_career(sev, 0, rng).offspring() == 0);
}

TEST_CASE("general careers: births sorted, ages within support, types from marks") {
  const auto model = load(fixtures::kGeneral);
  Stream rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto c = sample_career(model, 0, rng);
    CHECK((c.offspring() == 0 || c.offspring() == 3));
    for (std::size_t k = 0; k < c.births.size(); ++k) {
      CHECK(c.births[k].age >= 0.5);
      CHECK(c.births[k].age <= 2.0);
      if (k > 0) CHECK(c.births[k - 1].age <= c.births[k].age);
    }
    const auto d = sample_career(model, 1, rng);
    for (const auto& b : d.births) CHECK((b.age == 1.0 || b.age == 1.5));
  }
}

TEST_CASE("career cap bounds geometric draws") {
  const auto model =
      load(R"({"types": 1, "variant": "bgw", "career_cap": 3, "offspring": [{"geometric": 0.01}]})");
  Stream rng(3);
  bool threw = false;
  for (int i = 0; i < 100 && !threw; ++i) {
    try {
      (void)sample_career(model, 0, rng);
    } catch (const Error& e) {
      threw = e.code() == ErrorCode::LimitExceeded;
    }
  }
  CHECK(threw);
}

TEST_CASE("offspring pgf") {
  const double third = 1.0 / 3.0;
  CHECK(offspring_pgf(load(fixtures::kBgw), 0, std::vector{third}) ==
        doctest::Approx(third).epsilon(1e-15));
  for (const char* text : {fixtures::kBgw, fixtures::kFlip, fixtures::kGeometric,
                           fixtures::kSevastyanov, fixtures::kMarkov, fixtures::kGeneral}) {
    const auto model = load(text);
    const std::vector<double> ones(model.types(), 1.0);
    for (TypeId s = 0; s < model.types(); ++s)
      CHECK(offspring_pgf(model, s, ones) == doctest::Approx(1.0).epsilon(1e-14));
  }
  // Embedded pmf p_0 = 5/16, p_2 = 11/16.
  CHECK(offspring_pgf(load(fixtures::kSevastyanov), 0, std::vector{5.0 / 11.0}) ==
        doctest::Approx(5.0 / 11.0).epsilon(1e-15));
}

TEST_CASE("mean matrix") {
  CHECK(mean_matrix(load(fixtures::kBgw))(0, 0) == doctest::Approx(1.5));
  const auto flip = mean_matrix(load(fixtures::kFlip));
  CHECK(flip(0, 0) == 0.0);
  CHECK(flip(0, 1) == doctest::Approx(1.5));
  CHECK(flip(1, 0) == doctest::Approx(1.5));
  CHECK(flip(1, 1) == 0.0);
  CHECK(mean_matrix(load(fixtures::kOne))(0, 0) == 1.0);
  CHECK(mean_matrix(load(fixtures::kGeometric))(0, 0) == doctest::Approx(2.0));
  const auto gen = mean_matrix(load(fixtures::kGeneral));
  CHECK(gen(0, 0) == doctest::Approx(2.1 * 0.5));
  CHECK(gen(1, 0) == doctest::Approx(1.0 * 0.8));
}

TEST_CASE("pgf jacobian matches finite differences") {
  const auto model = load(fixtures::kGeneral);
  const std::vector<double> z{0.4, 0.7};
  const auto jac = offspring_pgf_jacobian(model, z);
  const double h = 1e-6;
  for (TypeId s = 0; s < 2; ++s) {
    for (std::size_t j = 0; j < 2; ++j) {
      auto up = z;
      auto down = z;
      up[j] += h;
      down[j] -= h;
      const double fd = (offspring_pgf(model, s, up) - offspring_pgf(model, s, down)) / (2 * h);
      CHECK(jac(s, j) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("mean reproduction measure") {
  const auto bgw = mean_reproduction_measure(load(fixtures::kBgw), 0);
  REQUIRE(bgw.atoms.size() == 1);
  CHECK(bgw.atoms[0].age == 1.0);
  CHECK(bgw.atoms[0].child_type == 0);
  CHECK(bgw.atoms[0].mass == doctest::Approx(1.5));

  const auto sev = mean_reproduction_measure(load(fixtures::kSevastyanov), 0);
  REQUIRE(sev.atoms.size() == 2);
  CHECK(sev.atoms[0].age == 1.0);
  CHECK(sev.atoms[0].mass == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sev.atoms[1].age == 2.0);
  CHECK(sev.atoms[1].mass == doctest::Approx(0.875).epsilon(1e-15));

  CHECK(mean_reproduction_measure(load(fixtures::kExtinct), 0).atoms.empty());

  const auto markov = mean_reproduction_measure(load(fixtures::kMarkov), 0);
  REQUIRE(markov.exponential.size() == 1);
  CHECK(markov.exponential[0].mass == doctest::Approx(1.5));
  CHECK(markov.exponential[0].rate == 1.0);

  CHECK_THROWS_AS(mean_reproduction_measure(load(fixtures::kGeneral), 0), Error);
  const auto atoms = mean_reproduction_measure(load(fixtures::kGeneral), 1);
  CHECK(atoms.total_mass() == doctest::Approx(1.0));
}

TEST_CASE("JSON: fractions, decimals and round trip") {
  CHECK(parse_real(nlohmann::json("3/4"), "/x") == 0.75);
  CHECK(parse_real(nlohmann::json("0.25"), "/x") == 0.25);
  CHECK(parse_real(nlohmann::json(0.5), "/x") == 0.5);
  CHECK_THROWS_AS(parse_real(nlohmann::json("1/0"), "/x"), Error);
  CHECK_THROWS_AS(parse_real(nlohmann::json("abc"), "/x"), Error);

  for (const char* text : {fixtures::kBgw, fixtures::kFlip, fixtures::kGeometric,
                           fixtures::kSevastyanov, fixtures::kMarkov, fixtures::kGeneral}) {
    const auto spec = spec_of(text);
    const auto doc = model_spec_to_json(spec);
    const auto again = model_spec_to_json(parse_model_spec(doc));
    CHECK(doc == again);
  }
}

TEST_CASE("JSON: parse errors name the path") {
  try {
    (void)load_model_text(R"({"types": 1, "variant": "bgw", "offspring": [{"x": 1}]})");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("/offspring/0") != std::string::npos);
  }
  try {
    (void)load_model_text(R"({"types": 1, "variant": "weird"})");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
  }
  try {
    (void)load_model_file("/nonexistent/model.json");
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
    CHECK(std::string(e.what()).find("/nonexistent/model.json") != std::string::npos);
  }
}

TEST_CASE("format_real is shortest round-trip") {
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(1.0) == "1");
  CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
}
