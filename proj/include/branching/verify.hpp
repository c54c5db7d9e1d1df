#pragma once

// Statistical and numerical checks: two-sample tests, spectral radius,
// Malthusian parameter, and the Monte Carlo identities relating the base and
// the extinction-conditioned process.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "branching/extinction.hpp"
#include "branching/model.hpp"
#include "branching/simulate.hpp"
#include "branching/tilt.hpp"
#include "json.hpp"

namespace branching {

class Histogram {
 public:
  using Key = std::vector<std::int64_t>;

  void add(const Key& key, std::uint64_t count = 1);
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t count(const Key& key) const;
  const std::map<Key, std::uint64_t>& counts() const noexcept { return counts_; }

 private:
  std::map<Key, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct TestReport {
  std::string name;
  double statistic = 0.0;
  std::optional<double> p_value;
  double threshold = 0.0;
  bool pass = false;
  std::vector<std::uint64_t> samples;
  /// Estimates behind the statistic, e.g. the two sides of an identity.
  std::vector<double> values;
  std::string note;
  double runtime_seconds = 0.0;  // not serialised with the report
};

/// Adjacent bins (in key order) are merged until both expected counts are
/// >= 5. Passes when p > alpha; fewer than two merged bins pass with a note.
TestReport chi_square_two_sample(const Histogram& h1, const Histogram& h2,
                                 double alpha = 1e-3, std::string name = "chi_square");

double tv_distance(const Histogram& h1, const Histogram& h2);
double tv_distance(const std::map<Histogram::Key, double>& p1,
                   const std::map<Histogram::Key, double>& p2);

/// Perron root of a nonnegative square matrix by power iteration on M + I
/// started from the all-ones vector.
double spectral_radius(const SquareMatrix& m, double tol = 1e-13);

/// Root alpha of sum_i mass_i e^{-alpha t_i} + sum_j mass_j r_j / (r_j + alpha) = 1.
/// Empty measures have none.
std::optional<double> malthusian_alpha(const MeanReproMeasure& mu);

/// Multi-type Malthusian parameter: the alpha at which the Laplace-transformed
/// mean reproduction matrix has spectral radius 1. Throws Error(Unsupported)
/// when a type's measure is unavailable.
std::optional<double> malthusian_parameter(const Model& model);

/// Real functional of the realised part of a generation line.
struct LineFunctional {
  std::string name;
  std::uint32_t generation = 1;
  std::function<double(std::span<const LineMember>)> g;
};

LineFunctional line_constant(std::uint32_t generation);
LineFunctional line_size(std::uint32_t generation);
LineFunctional line_empty(std::uint32_t generation);

/// Compares E~_s[g] from tilted simulation with E_s[g * RN weight] from base
/// simulation; passes when they differ by at most 4 combined standard errors.
TestReport importance_identity_check(const Model& model, const CareerSampler& tilted,
                                     std::span<const double> q, TypeId root,
                                     const LineFunctional& functional, std::uint64_t n_runs,
                                     std::uint64_t seed, unsigned threads = 0);

struct OutcomeSummary {
  std::string name;
  std::function<Histogram::Key(const PopulationOutcome&)> key;
};

/// Total progeny, with values >= top lumped into one key.
OutcomeSummary total_progeny_summary(std::int64_t top = 200);
/// Child counts of the ancestor by type.
OutcomeSummary first_generation_summary(std::size_t types);
/// (children of the ancestor, ancestor life span in thousandths).
OutcomeSummary root_career_summary();

/// Law of `summary` over base runs that went extinct versus over tilted runs.
/// Fewer than 10^3 extinct base runs make the report inconclusive (failing).
TestReport rejection_equivalence_check(const Model& model, const CareerSampler& tilted,
                                       TypeId root, const OutcomeSummary& summary,
                                       std::uint64_t n_tilted, std::uint64_t n_base,
                                       std::uint64_t cap, std::uint64_t seed,
                                       unsigned threads = 0);
/// Several summaries of the same runs, one report each.
std::vector<TestReport> rejection_equivalence_check(
    const Model& model, const CareerSampler& tilted, TypeId root,
    std::span<const OutcomeSummary> summaries, std::uint64_t n_tilted, std::uint64_t n_base,
    std::uint64_t cap, std::uint64_t seed, unsigned threads = 0);

/// Subtree size of the ancestor's first child (truncated at `depth`
/// generations below the ancestor) against fresh runs rooted at the child's
/// type. One report per child type with at least `min_samples` subtrees.
std::vector<TestReport> branching_property_check(const CareerSampler& sampler, TypeId root,
                                                 std::uint32_t depth, std::uint64_t n_runs,
                                                 std::uint64_t seed, unsigned threads = 0,
                                                 std::uint64_t min_samples = 1000,
                                                 const std::string& prefix = "branching");

/// Checks that the conditioned process is subcritical: tilted spectral radius
/// below 1 and below the base one, f'(q) < 1 for one type, and tilted
/// generation means E~[X_n] matching the tilted mean-matrix powers for n <= 5.
std::vector<TestReport> subcriticality_report(const TiltedModel& tilted, TypeId root,
                                              std::uint64_t n_runs, std::uint64_t seed,
                                              unsigned threads = 0);

nlohmann::json report_to_json(const TestReport& report);
nlohmann::json reports_to_json(std::span<const TestReport> reports);

}  // namespace branching
