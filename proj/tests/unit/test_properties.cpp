// Randomised properties over generated models and trees.
#include <cmath>
#include <numeric>

#include "branching/error.hpp"
#include "branching/extinction.hpp"
#include "branching/label.hpp"
#include "branching/model_json.hpp"
#include "branching/simulate.hpp"
#include "branching/tilt.hpp"
#include "branching/verify.hpp"
#include "doctest.h"
#include "support/oracle.hpp"

using namespace branching;

namespace {

constexpr int kCases = 200;

// Random single- or multi-type BGW model with small supports.
Model random_bgw(Stream& rng, std::size_t types) {
  BgwSpec law;
  for (std::size_t s = 0; s < types; ++s) {
    CountPmf pmf;
    const int support = 1 + static_cast<int>(rng() % 4);
    double total = 0.0;
    for (int i = 0; i < support; ++i) {
      CountOutcome o;
      for (std::size_t t = 0; t < types; ++t) o.counts.push_back(static_cast<std::uint32_t>(rng() % 4));
      o.prob = 0.05 + rng.uniform();
      bool dup = false;
      for (const auto& prev : pmf.outcomes) dup = dup || prev.counts == o.counts;
      if (dup) continue;
      total += o.prob;
      pmf.outcomes.push_back(o);
    }
    for (auto& o : pmf.outcomes) o.prob /= total;
    law.offspring.emplace_back(pmf);
  }
  ModelSpec spec;
  spec.types = types;
  spec.law = law;
  return Model(spec);
}

Label random_label(Stream& rng, std::size_t max_gen) {
  std::vector<Label::Entry> path(rng() % (max_gen + 1));
  for (auto& x : path) x = 1 + static_cast<Label::Entry>(rng() % 3);
  return Label(path);
}

LabelSet random_tree(Stream& rng) {
  LabelSet tree{Label{}};
  const int n = static_cast<int>(rng() % 20);
  for (int i = 0; i < n; ++i) {
    Label x = random_label(rng, 4);
    while (true) {
      tree.insert(x);
      if (x.is_root()) break;
      x = mother(x);
    }
  }
  return tree;
}

}  // namespace

TEST_CASE("property: q is the minimal fixed point in [0, 1]") {
  Stream rng(101);
  for (int c = 0; c < kCases; ++c) {
    const auto model = random_bgw(rng, 1 + c % 3);
    SolveReport r;
    try {
      r = solve_q(model, 1e-12, 200000);
    } catch (const Error&) {
      continue;  // near-critical draws converge too slowly
    }
    CHECK(r.monotone);
    for (TypeId s = 0; s < model.types(); ++s) {
      CHECK(r.q[s] >= 0.0);
      CHECK(r.q[s] <= 1.0);
      CHECK(std::abs(offspring_pgf(model, s, r.q) - r.q[s]) < 1e-9);
    }
    if (model.types() != 1) continue;
    // By convexity f(x) >= x on [0, q] exactly when no smaller root exists.
    for (double t : {0.0, 0.25, 0.5, 0.9, 0.99}) {
      std::vector<double> z(r.q);
      for (auto& x : z) x *= t;
      for (TypeId s = 0; s < model.types(); ++s)
        CHECK(offspring_pgf(model, s, z) >= z[s] - 1e-12);
    }
  }
}

TEST_CASE("property: tilted laws are normalised and subcritical") {
  Stream rng(202);
  int supercritical = 0;
  for (int c = 0; c < kCases; ++c) {
    const auto model = random_bgw(rng, 1 + c % 3);
    SolveReport r;
    try {
      r = solve_q(model, 1e-12, 200000);
    } catch (const Error&) {
      continue;
    }
    if (r.zero_types.size() == model.types()) continue;
    const TiltedModel tilted(model, r.q);
    const auto& law = std::get<BgwSpec>(tilted.analytic().spec().law);
    for (TypeId s = 0; s < model.types(); ++s) {
      if (!tilted.conditionable(s)) continue;
      const auto& pmf = std::get<CountPmf>(law.offspring[s]);
      double sum = 0.0;
      for (const auto& o : pmf.outcomes) sum += o.prob;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    const double rho = spectral_radius(mean_matrix(model));
    bool all_positive = true;
    for (double q : r.q) all_positive = all_positive && q > 1e-9 && q < 1.0 - 1e-9;
    if (rho > 1.0 + 1e-6 && all_positive) {
      ++supercritical;
      const double rho_tilted = spectral_radius(tilted.mean_matrix());
      CHECK(rho_tilted < 1.0);
      // Tilted mean matrix equals the analytic tilted kernel's mean matrix.
      const auto a = mean_matrix(tilted.analytic());
      const auto b = tilted.mean_matrix();
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a(i, j) - b(i, j)) < 1e-9);
    }
  }
  CHECK(supercritical > 10);
}

TEST_CASE("property: generation-1 RN weights integrate to one exactly") {
  Stream rng(303);
  for (int c = 0; c < kCases; ++c) {
    const auto model = random_bgw(rng, 1 + c % 2);
    SolveReport r;
    try {
      r = solve_q(model, 1e-12, 200000);
    } catch (const Error&) {
      continue;
    }
    for (TypeId s = 0; s < model.types(); ++s) {
      if (r.q[s] <= 0.0) continue;
      const auto& pmf = std::get<CountPmf>(std::get<BgwSpec>(model.spec().law).offspring[s]);
      double mean = 0.0;
      for (const auto& o : pmf.outcomes) {
        std::vector<TypeId> line;
        for (TypeId t = 0; t < o.counts.size(); ++t) line.insert(line.end(), o.counts[t], t);
        mean += o.prob * rn_weight(s, line, r.q).value();
      }
      CHECK(std::abs(mean - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("property: generation laws by exact enumeration") {
  // E[X_n] = m^n and P(X_n = 0) -> q for random single-type pmfs.
  Stream rng(404);
  for (int c = 0; c < 30; ++c) {
    std::vector<double> pmf(1 + rng() % 4);
    for (auto& p : pmf) p = rng.uniform() + 0.05;
    const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    nlohmann::json offspring = nlohmann::json::object();
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      pmf[k] /= total;
      offspring[std::to_string(k)] = pmf[k];
    }
    const auto model = load_model_text(
        nlohmann::json{{"types", 1}, {"variant", "bgw"}, {"offspring", {offspring}}}.dump());
    const double m = mean_matrix(model)(0, 0);
    const auto law = oracle::generation_law(pmf, 3);
    double mean = 0.0;
    for (std::size_t k = 0; k < law.size(); ++k) mean += k * law[k];
    CHECK(mean == doctest::Approx(std::pow(m, 3)).epsilon(1e-9));
    std::vector<double> z{0.0};
    for (int g = 0; g < 3; ++g) z[0] = offspring_pgf(model, 0, z);
    CHECK(z[0] == doctest::Approx(law[0]).epsilon(1e-12));
  }
}

TEST_CASE("property: lines and covering on random trees") {
  Stream rng(505);
  for (int c = 0; c < kCases; ++c) {
    const auto tree = random_tree(rng);
    // Every generation slice is a line; its union with childless
    // individuals of earlier generations covers the tree.
    const std::size_t n = 1 + rng() % 3;
    LabelSet slice;
    LabelSet cover;
    for (const auto& x : tree) {
      if (x.generation() == n) slice.insert(x);
      bool childless = true;
      for (const auto& y : tree) childless = childless && !(y != x && stems_from(y, x));
      if (x.generation() == n || (x.generation() < n && childless)) cover.insert(x);
    }
    CHECK(is_line(slice));
    CHECK(is_line(cover));
    CHECK(is_covering_on(cover, tree));
    for (const auto& x : progeny_of(slice, tree)) {
      bool found = false;
      for (const auto& y : slice) found = found || stems_from(x, y);
      CHECK(found);
    }
    // Adding an ancestor of a member breaks the line property.
    if (!slice.empty() && n > 0) {
      auto broken = slice;
      broken.insert(mother(*slice.begin()));
      CHECK_FALSE(is_line(broken));
    }
  }
}

TEST_CASE("property: label order agrees with (generation, path)") {
  Stream rng(606);
  for (int c = 0; c < 1000; ++c) {
    const auto a = random_label(rng, 4);
    const auto b = random_label(rng, 4);
    const bool expected = a.generation() != b.generation() ? a.generation() < b.generation()
                                                           : a.path() < b.path();
    CHECK((a < b) == expected);
    CHECK(stems_from(a.concat(b), a));
  }
}

TEST_CASE("property: results do not depend on the thread count") {
  Stream rng(707);
  for (int c = 0; c < 5; ++c) {
    const auto model = random_bgw(rng, 2);
    const ModelSampler sampler(model);
    SimulationLimits limits;
    limits.cap = 300;
    for (unsigned threads : {2u, 4u}) {
      const auto a = run_replicates(sampler, 0, 100, limits, 9, 1);
      const auto b = run_replicates(sampler, 0, 100, limits, 9, threads);
      for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(outcome_to_json(a[i]) == outcome_to_json(b[i]));
    }
  }
}
