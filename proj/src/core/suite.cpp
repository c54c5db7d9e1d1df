#include "branching/suite.hpp"

#include <chrono>
#include <limits>
#include <optional>
#include <variant>
#include <cmath>
#include <sstream>

#include "branching/error.hpp"

namespace branching {

namespace {

TestReport inapplicable(std::string name, std::string why) {
  TestReport r;
  r.name = std::move(name);
  r.pass = true;
  r.note = "inapplicable: " + std::move(why);
  return r;
}

bool includes(Suite requested, Suite part) {
  return requested == Suite::All || requested == part;
}

// Career histogram key: child counts by type, then life span in thousandths.
Histogram career_histogram(const CareerSampler& sampler, TypeId s, std::uint64_t n,
                           std::uint64_t seed) {
  Histogram h;
  Stream rng(seed, 0);
  LifeCareer career;
  for (std::uint64_t i = 0; i < n; ++i) {
    sampler.sample(s, rng, career);
    Histogram::Key key;
    for (auto c : career.counts_by_type(sampler.types())) key.push_back(static_cast<std::int64_t>(c));
    key.push_back(career.life_span ? std::llround(*career.life_span * 1000.0) : -1);
    h.add(key);
  }
  return h;
}

bool discrete_ages(const Model& model) {
  if (model.variant() != Variant::Sevastyanov) return true;
  return std::holds_alternative<DiscreteLife>(std::get<SevastyanovSpec>(model.spec().law).life);
}

double max_normalization_error(const Model& tilted) {
  double err = 0.0;
  auto check = [&](double sum) { err = std::max(err, std::abs(sum - 1.0)); };
  std::visit(
      [&](const auto& law) {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, BgwSpec>) {
          for (const auto& l : law.offspring) {
            if (const auto* pmf = std::get_if<CountPmf>(&l)) {
              double sum = 0.0;
              for (const auto& o : pmf->outcomes) sum += o.prob;
              check(sum);
            }
          }
        } else if constexpr (std::is_same_v<T, SevastyanovSpec>) {
          auto split_sum = [](const SizePmf& pmf) {
            double sum = 0.0;
            for (const auto& [k, p] : pmf) sum += p;
            return sum;
          };
          if (const auto* e = std::get_if<ExponentialLife>(&law.life)) {
            check(split_sum(e->split));
          } else {
            double g = 0.0;
            for (const auto& atom : std::get<DiscreteLife>(law.life).atoms) {
              g += atom.prob;
              check(split_sum(atom.split));
            }
            check(g);
          }
        }
      },
      tilted.spec().law);
  return err;
}

void q_checks(const Model& model, const SolveReport& solved, const SuiteOptions& o,
              std::vector<TestReport>& out) {
  {
    TestReport r;
    r.name = "q.fixed_point";
    r.statistic = solved.residual;
    r.threshold = o.tol;
    r.values = solved.q;
    r.pass = solved.residual < o.tol && solved.monotone;
    std::ostringstream note;
    note << "iterations=" << solved.iterations << ", last_step=" << solved.last_step
         << ", monotone=" << (solved.monotone ? "true" : "false");
    r.note = note.str();
    out.push_back(r);
  }
  const auto est = estimate_q_mc(model, o.root, o.runs, o.cap,
                                 std::numeric_limits<double>::infinity(),
                                 derive_seed(o.seed, 10), o.threads);
  const double q = solved.q[o.root];
  TestReport r;
  r.name = "q.monte_carlo";
  r.threshold = 4.0;
  r.samples = {est.runs};
  r.values = {est.estimate, q, est.ci_low, est.ci_high};
  const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(est.runs));
  if (se > 0.0) {
    r.statistic = std::abs(est.estimate - q) / se;
    r.pass = r.statistic <= 4.0;
  } else {
    r.statistic = std::abs(est.estimate - q);
    r.pass = r.statistic <= 1e-9;
  }
  std::ostringstream note;
  note.precision(10);
  note << "estimate=" << est.estimate << ", q=" << q << ", ci=[" << est.ci_low << ", "
       << est.ci_high << "], censored_fraction=" << est.censored_fraction();
  r.note = note.str();
  out.push_back(r);
}

void tilt_checks(const Model& model, const TiltedModel& tilted, const SuiteOptions& o,
                 std::vector<TestReport>& out) {
  const auto& q = tilted.q();
  const double qs = q[o.root];
  if (tilted.has_analytic()) {
    TestReport r;
    r.name = "tilt.normalization";
    r.statistic = max_normalization_error(tilted.analytic());
    r.threshold = 1e-12;
    r.pass = r.statistic <= r.threshold;
    out.push_back(r);

    if (model.types() == 1) {
      const double fprime = offspring_pgf_jacobian(model, q)(0, 0);
      const double mean = mean_matrix(tilted.analytic())(0, 0);
      TestReport m;
      m.name = "tilt.mean_identity";
      m.statistic = std::abs(mean - fprime);
      m.threshold = 1e-12;
      m.values = {mean, fprime};
      m.pass = m.statistic <= m.threshold;
      out.push_back(m);
    }
  }

  {
    const auto acc = estimate_acceptance(model, q, o.root, o.runs, derive_seed(o.seed, 20));
    TestReport r;
    r.name = "tilt.acceptance_rate";
    r.threshold = 4.0;
    r.samples = {acc.attempts};
    r.values = {acc.rate(), qs};
    const double se = std::sqrt(qs * (1.0 - qs) / static_cast<double>(acc.attempts));
    r.statistic = se > 0.0 ? std::abs(acc.rate() - qs) / se : std::abs(acc.rate() - qs);
    r.pass = se > 0.0 ? r.statistic <= 4.0 : r.statistic <= 1e-12;
    out.push_back(r);
  }

  const RejectionSampler rejection(model, q);
  if (tilted.has_analytic()) {
    const ModelSampler analytic(tilted.analytic());
    const auto h1 = career_histogram(rejection, o.root, o.runs, derive_seed(o.seed, 21));
    const auto h2 = career_histogram(analytic, o.root, o.runs, derive_seed(o.seed, 22));
    if (discrete_ages(model)) {
      out.push_back(chi_square_two_sample(h1, h2, 1e-3, "tilt.rejection_vs_analytic"));
    } else {
      // Continuous life spans: compare child counts only.
      Histogram c1;
      Histogram c2;
      for (const auto& [k, c] : h1.counts()) c1.add({k.begin(), k.end() - 1}, c);
      for (const auto& [k, c] : h2.counts()) c2.add({k.begin(), k.end() - 1}, c);
      out.push_back(chi_square_two_sample(c1, c2, 1e-3, "tilt.rejection_vs_analytic"));
    }
  }

  const auto sampler = tilted.sampler();
  const std::vector<OutcomeSummary> summaries = {
      total_progeny_summary(),
      discrete_ages(model) && model.variant() != Variant::General
          ? root_career_summary()
          : first_generation_summary(model.types())};
  const auto eq = rejection_equivalence_check(model, *sampler, o.root, summaries, o.runs,
                                              o.runs, o.cap, derive_seed(o.seed, 23), o.threads);
  out.insert(out.end(), eq.begin(), eq.end());

  SimulationLimits limits;
  limits.cap = o.cap;
  limits.snapshot_depth = 0;
  const auto flags = map_replicates(o.runs, derive_seed(o.seed, 25), o.threads,
                                    [&](std::uint64_t, Stream& rng) {
                                      return run_population(*sampler, o.root, limits, rng).extinct;
                                    });
  std::uint64_t extinct = 0;
  for (bool f : flags) extinct += f;
  TestReport r;
  r.name = "tilt.extinct_fraction";
  r.samples = {o.runs};
  r.statistic = static_cast<double>(o.runs - extinct) / static_cast<double>(o.runs);
  r.threshold = 1e-3;
  r.values = {static_cast<double>(extinct) / static_cast<double>(o.runs)};
  r.pass = r.statistic < r.threshold;
  r.note = "censored runs counted against the threshold";
  out.push_back(r);
}

void rn_checks(const Model& model, const TiltedModel& tilted, const SuiteOptions& o,
               std::vector<TestReport>& out) {
  const auto& q = tilted.q();
  const auto sampler = tilted.sampler();
  std::uint64_t salt = 30;
  for (const auto& f : {line_constant(1), line_constant(2), line_size(1), line_size(2),
                        line_empty(1)}) {
    out.push_back(importance_identity_check(model, *sampler, q, o.root, f, o.runs,
                                            derive_seed(o.seed, salt++), o.threads));
  }
  // E[(1/q_s) prod_{first generation} q] = f_s(q) / q_s.
  TestReport r;
  r.name = "rn.exact_weight_mean.gen1";
  const double mean = offspring_pgf(model, o.root, q) / q[o.root];
  r.statistic = std::abs(mean - 1.0);
  r.threshold = 1e-10;
  r.values = {mean};
  r.pass = r.statistic <= r.threshold;
  out.push_back(r);
}

void malthus_checks(const Model& model, const TiltedModel& tilted, const SuiteOptions& o,
                    std::vector<TestReport>& out) {
  const double q = tilted.q()[o.root];
  if (!tilted.has_analytic()) {
    out.push_back(inapplicable("malthus.sign_flip",
                               "the tilted reproduction measure of sampler-only models is not built"));
    return;
  }
  if (!(q > 0.0) || spectral_radius(mean_matrix(model)) <= 1.0) {
    out.push_back(inapplicable("malthus.sign_flip", "needs a supercritical model with q > 0"));
    return;
  }
  std::optional<double> base;
  std::optional<double> conditioned;
  try {
    base = malthusian_parameter(model);
    conditioned = malthusian_parameter(tilted.analytic());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Unsupported) throw;
    out.push_back(inapplicable("malthus.sign_flip", e.what()));
    return;
  }
  TestReport r;
  r.name = "malthus.sign_flip";
  r.threshold = 0.0;
  if (!base || !conditioned) {
    r.pass = false;
    r.note = "Malthusian parameter does not exist";
    out.push_back(r);
    return;
  }
  r.statistic = *conditioned;
  r.values = {*base, *conditioned};
  r.pass = *base > 0.0 && *conditioned < 0.0;
  std::ostringstream note;
  note.precision(12);
  note << "alpha=" << *base << ", tilted_alpha=" << *conditioned;
  r.note = note.str();
  out.push_back(r);
}

}  // namespace

Suite parse_suite(const std::string& name) {
  if (name == "q") return Suite::Q;
  if (name == "tilt") return Suite::Tilt;
  if (name == "rn") return Suite::Rn;
  if (name == "subcritical") return Suite::Subcritical;
  if (name == "malthus") return Suite::Malthus;
  if (name == "branching") return Suite::Branching;
  if (name == "all") return Suite::All;
  throw Error(ErrorCode::InvalidArgument, "unknown suite \"" + name + "\"");
}

std::string to_string(Suite suite) {
  switch (suite) {
    case Suite::Q: return "q";
    case Suite::Tilt: return "tilt";
    case Suite::Rn: return "rn";
    case Suite::Subcritical: return "subcritical";
    case Suite::Malthus: return "malthus";
    case Suite::Branching: return "branching";
    case Suite::All: return "all";
  }
  return "unknown";
}

std::vector<TestReport> run_suite(const Model& model, Suite suite, const SuiteOptions& o) {
  if (o.root >= model.types()) throw Error(ErrorCode::InvalidArgument, "root type out of range");
  if (o.runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be positive");

  std::vector<TestReport> out;
  auto timed = [&](auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    const auto before = out.size();
    fn();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto i = before; i < out.size(); ++i) {
      out[i].runtime_seconds = secs / static_cast<double>(out.size() - before);
    }
  };

  const auto solved = solve_q(model, o.tol, o.max_iter);
  if (includes(suite, Suite::Q)) timed([&] { q_checks(model, solved, o, out); });

  const bool conditionable = solved.q[o.root] > 0.0;
  if (!conditionable) {
    if (suite != Suite::Q) {
      out.push_back(inapplicable("conditioning",
                                 "extinction has probability 0 from the root type"));
    }
    return out;
  }
  const TiltedModel tilted(model, solved.q);

  if (includes(suite, Suite::Tilt)) timed([&] { tilt_checks(model, tilted, o, out); });
  if (includes(suite, Suite::Rn)) timed([&] { rn_checks(model, tilted, o, out); });
  if (includes(suite, Suite::Subcritical)) {
    timed([&] {
      auto reports = subcriticality_report(tilted, o.root, o.runs, derive_seed(o.seed, 40),
                                           o.threads);
      out.insert(out.end(), reports.begin(), reports.end());
    });
  }
  if (includes(suite, Suite::Malthus)) timed([&] { malthus_checks(model, tilted, o, out); });
  if (includes(suite, Suite::Branching)) {
    timed([&] {
      const ModelSampler base(model);
      const auto conditioned = tilted.sampler();
      auto a = branching_property_check(base, o.root, 6, o.runs, derive_seed(o.seed, 50),
                                        o.threads, 1000, "branching.base");
      auto b = branching_property_check(*conditioned, o.root, 6, o.runs,
                                        derive_seed(o.seed, 51), o.threads, 1000,
                                        "branching.tilted");
      out.insert(out.end(), a.begin(), a.end());
      out.insert(out.end(), b.begin(), b.end());
    });
  }
  return out;
}

}  // namespace branching
