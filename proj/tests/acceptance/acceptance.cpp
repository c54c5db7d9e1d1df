// Acceptance checks. Prints one PASS/FAIL line per criterion (details
// indented above it) and exits nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "branching/extinction.hpp"
#include "branching/suite.hpp"
#include "branching/tilt.hpp"
#include "branching/verify.hpp"
#include "support/models.hpp"
#include "support/oracle.hpp"

using namespace branching;
using fixtures::load;
using oracle::Rational;

namespace {

// Pinned tolerances.
constexpr double kFixedPointTol = 1e-10;
constexpr double kSureTol = 1e-12;
constexpr double kTiltTol = 1e-12;
constexpr double kRadiusTol = 1e-10;
constexpr double kMalthusTol = 1e-8;
constexpr double kSeBound = 4.0;
constexpr double kChiAlpha = 1e-3;
constexpr double kCensoredMax = 1e-3;
constexpr std::uint64_t kTiltedRuns = 100000;
constexpr std::uint64_t kMinExtinctBase = 10000;
constexpr std::uint64_t kCap = 1000;

class Criterion {
 public:
  explicit Criterion(std::string title) : title_(std::move(title)) {}

  void check(bool ok, const std::string& what) {
    std::printf("    %s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    pass_ = pass_ && ok;
  }
  void report(const TestReport& r, const std::string& what) {
    char buf[160];
    if (r.p_value) {
      std::snprintf(buf, sizeof buf, "%s: %s p=%.4g", what.c_str(), r.name.c_str(), *r.p_value);
    } else {
      std::snprintf(buf, sizeof buf, "%s: %s stat=%.4g", what.c_str(), r.name.c_str(), r.statistic);
    }
    check(r.pass, buf);
  }
  bool finish(int index, double seconds) const {
    std::printf("%s criterion %d: %s (%.1fs)\n", pass_ ? "PASS" : "FAIL", index, title_.c_str(),
                seconds);
    std::fflush(stdout);
    return pass_;
  }

 private:
  std::string title_;
  bool pass_ = true;
};

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

void extinction(Criterion& c) {
  const auto bgw = solve_q(load(fixtures::kBgw)).q;
  c.check(std::abs(bgw[0] - oracle::quadratic_q(0.25, 0.75)) <= kFixedPointTol,
          fmt("binary BGW q=%.15f vs 1/3", bgw[0]));
  const auto flip = solve_q(load(fixtures::kFlip)).q;
  c.check(std::abs(flip[0] - 1.0 / 3.0) <= kFixedPointTol &&
              std::abs(flip[1] - 1.0 / 3.0) <= kFixedPointTol,
          fmt("flip model q=(%.15f, %.15f)", flip[0], flip[1]));
  const auto sub = solve_q(load(fixtures::kSubcritical)).q;
  c.check(std::abs(sub[0] - 1.0) <= kSureTol, fmt("subcritical mirror q=%.15f", sub[0]));
}

void tilt_formulas(Criterion& c) {
  const auto model = load(fixtures::kBgw);
  const auto& pmf = std::get<CountPmf>(std::get<BgwSpec>(model.spec().law).offspring[0]);
  const double q = solve_q(model).q[0];
  const auto tilted = tilt_offspring_pmf(pmf, std::vector{q}, 0);
  double err = 0.0;
  for (std::size_t i = 0; i < pmf.outcomes.size(); ++i) {
    const double k = pmf.outcomes[i].counts[0];
    err = std::max(err, std::abs(tilted.outcomes[i].prob - pmf.outcomes[i].prob * std::pow(q, k - 1)));
  }
  c.check(err <= kTiltTol, fmt("tilted BGW vs p_k q^(k-1): max error %.3g", err));

  const Rational rq(5, 11);
  const Rational half(1, 2);
  const Rational w1 = half * (half / rq + half * rq);
  const Rational w2 = half * (Rational(1, 8) / rq + Rational(7, 8) * rq);
  const Rational p0 = (half / rq) / (half / rq + half * rq);
  const auto sev = load(fixtures::kSevastyanov);
  const double qs = solve_q(sev).q[0];
  const auto& life = std::get<DiscreteLife>(std::get<SevastyanovSpec>(sev.spec().law).life);
  const auto t = tilt_sevastyanov(life, qs);
  double split0 = -1.0;
  for (const auto& [k, p] : t.atoms[0].split) {
    if (k == 0) split0 = p;
  }
  c.check(w1 == Rational(73, 110) && w2 == Rational(37, 110) && p0 == Rational(121, 146),
          "exact oracle: G~ = (73/110, 37/110), p~_0(1) = 121/146");
  c.check(std::abs(t.atoms[0].prob - oracle::to_double(w1)) <= kTiltTol &&
              std::abs(t.atoms[1].prob - oracle::to_double(w2)) <= kTiltTol,
          fmt("G~ = (%.15f, %.15f)", t.atoms[0].prob, t.atoms[1].prob));
  c.check(std::abs(split0 - oracle::to_double(p0)) <= kTiltTol, fmt("p~_0(1) = %.15f", split0));
}

void equivalence(Criterion& c) {
  const std::vector<std::pair<const char*, const char*>> models = {
      {"bgw", fixtures::kBgw}, {"geometric", fixtures::kGeometric},
      {"sevastyanov", fixtures::kSevastyanov}};
  std::uint64_t seed = 300;
  for (const auto& [name, text] : models) {
    const auto model = load(text);
    const TiltedModel tilted(model, solve_q(model).q);
    const auto sampler = tilted.sampler();
    const double q = tilted.q()[0];
    const auto n_base = static_cast<std::uint64_t>(std::ceil(1.15 * kMinExtinctBase / q));
    std::vector<OutcomeSummary> summaries = {total_progeny_summary(),
                                             first_generation_summary(1)};
    if (std::string(name) == "sevastyanov") summaries.push_back(root_career_summary());
    const auto reports = rejection_equivalence_check(model, *sampler, 0, summaries, kTiltedRuns,
                                                     n_base, kCap, seed++);
    for (const auto& r : reports) {
      c.report(r, name);
      c.check(r.samples.size() == 2 && r.samples[0] >= kMinExtinctBase &&
                  r.samples[1] >= kTiltedRuns,
              std::string(name) + ": " + std::to_string(r.samples.empty() ? 0 : r.samples[0]) +
                  " extinct base runs, " +
                  std::to_string(r.samples.size() < 2 ? 0 : r.samples[1]) + " tilted runs");
    }
  }
}

void rn_identity(Criterion& c) {
  const auto model = load(fixtures::kBgw);
  const TiltedModel tilted(model, solve_q(model).q);
  const auto sampler = tilted.sampler();
  std::uint64_t seed = 400;
  for (const auto& f : {line_constant(1), line_constant(2), line_size(1), line_size(2),
                        line_empty(1), line_empty(2)}) {
    c.report(importance_identity_check(model, *sampler, tilted.q(), 0, f, 100000, seed++),
             "bgw");
  }
  // Exact generation-1 expectation of the weight, summed over the pmf.
  const double q = tilted.q()[0];
  const auto& pmf = std::get<CountPmf>(std::get<BgwSpec>(model.spec().law).offspring[0]);
  double mean = 0.0;
  for (const auto& o : pmf.outcomes) {
    mean += o.prob * rn_weight(0, std::vector<TypeId>(o.counts[0], 0), tilted.q()).value();
  }
  c.check(std::abs(mean - 1.0) <= 1e-12, fmt("exact E[weight] over generation 1 = %.15f", mean));
  (void)q;
}

void dies_out(Criterion& c) {
  const std::vector<std::pair<const char*, const char*>> models = {
      {"bgw", fixtures::kBgw},
      {"flip", fixtures::kFlip},
      {"geometric", fixtures::kGeometric},
      {"sevastyanov", fixtures::kSevastyanov},
      {"markov", fixtures::kMarkov},
      {"general", fixtures::kGeneral}};
  std::uint64_t seed = 500;
  for (const auto& [name, text] : models) {
    const auto model = load(text);
    const TiltedModel tilted(model, solve_q(model).q);
    const auto sampler = tilted.sampler();
    SimulationLimits limits;
    limits.cap = 10000;
    limits.snapshot_depth = 0;
    const auto extinct = map_replicates(kTiltedRuns, seed++, 0, [&](std::uint64_t, Stream& rng) {
      return run_population(*sampler, 0, limits, rng).extinct;
    });
    std::uint64_t n = 0;
    for (bool e : extinct) n += e;
    const double censored = 1.0 - static_cast<double>(n) / kTiltedRuns;
    c.check(censored < kCensoredMax,
            fmt((std::string(name) + ": extinct fraction %.6f, censored %.2g").c_str(),
                1.0 - censored, censored));
  }
}

void subcriticality(Criterion& c) {
  const auto bgw = load(fixtures::kBgw);
  const auto q = solve_q(bgw).q;
  const double fprime = offspring_pgf_jacobian(bgw, q)(0, 0);
  c.check(std::abs(fprime - 0.5) <= kTiltTol, fmt("binary BGW f'(q) = %.15f", fprime));

  const auto flip = load(fixtures::kFlip);
  const TiltedModel tilted_flip(flip, solve_q(flip).q);
  const double rho = spectral_radius(tilted_flip.mean_matrix());
  c.check(std::abs(rho - 0.5) <= kRadiusTol, fmt("flip tilted spectral radius = %.15f", rho));

  const TiltedModel tilted_bgw(bgw, q);
  for (const auto& r : subcriticality_report(tilted_bgw, 0, 100000, 600)) {
    if (r.name == "subcritical.generation_means") {
      c.check(r.pass && r.statistic <= kSeBound,
              "E~[X_n] vs (1/2)^n for n <= 5: max |z| = " + fmt("%.3f", r.statistic));
    }
  }
}

void malthus(Criterion& c) {
  const auto markov = load(fixtures::kMarkov);
  const TiltedModel tm(markov, solve_q(markov).q);
  const auto a = malthusian_parameter(markov);
  const auto at = malthusian_parameter(tm.analytic());
  c.check(a && at && std::abs(*a - 0.5) <= kMalthusTol && std::abs(*at + 0.5) <= kMalthusTol,
          fmt("Markov splitting: alpha = %.12f, tilted alpha = %.12f", a.value_or(NAN),
              at.value_or(NAN)));
  const auto bgw = load(fixtures::kBgw);
  const TiltedModel tb(bgw, solve_q(bgw).q);
  const auto b = malthusian_parameter(bgw);
  const auto bt = malthusian_parameter(tb.analytic());
  c.check(b && bt && std::abs(*b - std::log(1.5)) <= kMalthusTol &&
              std::abs(*bt - std::log(0.5)) <= kMalthusTol,
          fmt("unit-age BGW: alpha = %.12f, tilted alpha = %.12f", b.value_or(NAN),
              bt.value_or(NAN)));
}

void branching_property(Criterion& c) {
  const auto model = load(fixtures::kBgw);
  const ModelSampler base(model);
  const TiltedModel tilted(model, solve_q(model).q);
  const auto conditioned = tilted.sampler();
  for (const auto& r : branching_property_check(base, 0, 6, 40000, 800, 0, 1000, "base"))
    c.report(r, "unconditioned");
  for (const auto& r : branching_property_check(*conditioned, 0, 6, 40000, 801, 0, 1000, "tilted"))
    c.report(r, "conditioned");
}

void determinism(Criterion& c) {
  SuiteOptions o;
  o.runs = 5000;
  o.seed = 42;
  const auto model = load(fixtures::kBgw);
  o.threads = 1;
  const auto a = reports_to_json(run_suite(model, Suite::All, o)).dump();
  const auto b = reports_to_json(run_suite(model, Suite::All, o)).dump();
  o.threads = 3;
  const auto d = reports_to_json(run_suite(model, Suite::All, o)).dump();
  c.check(a == b, "same seed, same thread count: identical report bytes");
  c.check(a == d, "same seed, 1 vs 3 threads: identical report bytes");
  o.seed = 43;
  o.threads = 1;
  const auto e = reports_to_json(run_suite(model, Suite::All, o)).dump();
  c.check(a != e, "different seed: reports differ");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria = {
      {"extinction fixed point", extinction},
      {"tilt formulas exact", tilt_formulas},
      {"conditioned law equals tilted law", equivalence},
      {"Radon-Nikodym identity", rn_identity},
      {"conditioned process dies out", dies_out},
      {"subcriticality", subcriticality},
      {"Malthusian sign flip", malthus},
      {"branching property", branching_property},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Criterion c(criteria[i].first);
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.check(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !c.finish(static_cast<int>(i + 1), secs);
  }
  std::printf("%s: %d of %zu criteria failed\n", failed ? "FAILED" : "ALL PASSED", failed,
              criteria.size());
  return failed ? 1 : 0;
}
