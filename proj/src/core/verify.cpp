#include "branching/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "branching/error.hpp"

namespace branching {

namespace {

constexpr double kSeThreshold = 4.0;
constexpr std::uint64_t kLargeCap = 10'000'000;

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments_of(std::span<const double> xs) {
  Moments m;
  if (xs.empty()) return m;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / (n - 1) / n);
  }
  return m;
}

std::string describe(std::initializer_list<std::pair<const char*, double>> items) {
  std::ostringstream os;
  os.precision(10);
  bool first = true;
  for (const auto& [k, v] : items) {
    if (!first) os << ", ";
    os << k << "=" << v;
    first = false;
  }
  return os.str();
}

// z-score of two means; exact agreement required when both have zero spread.
TestReport compare_means(std::string name, const Moments& a, const Moments& b,
                         std::uint64_t na, std::uint64_t nb) {
  TestReport r;
  r.name = std::move(name);
  r.threshold = kSeThreshold;
  r.samples = {na, nb};
  r.values = {a.mean, b.mean};
  const double se = std::sqrt(a.se * a.se + b.se * b.se);
  const double diff = std::abs(a.mean - b.mean);
  // Weights built from a q solved to ~1e-12 carry that much rounding.
  const double roundoff = 1e-9 * std::max(1.0, std::abs(a.mean));
  if (se == 0.0) {
    r.statistic = diff;
    r.pass = diff <= roundoff;
    r.note = "degenerate variance; exact comparison";
  } else {
    r.statistic = diff / se;
    r.pass = r.statistic <= kSeThreshold || diff <= roundoff;
    if (r.statistic > kSeThreshold && r.pass) r.note = "difference within rounding";
  }
  return r;
}

SimulationLimits generation_limits(std::uint32_t generation) {
  SimulationLimits limits;
  limits.cap = kLargeCap;
  limits.max_generation = generation;
  limits.snapshot_depth = generation;
  return limits;
}

}  // namespace

void Histogram::add(const Key& key, std::uint64_t count) {
  counts_[key] += count;
  total_ += count;
}

std::uint64_t Histogram::count(const Key& key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

TestReport chi_square_two_sample(const Histogram& h1, const Histogram& h2, double alpha,
                                 std::string name) {
  TestReport r;
  r.name = std::move(name);
  r.threshold = alpha;
  r.samples = {h1.total(), h2.total()};
  if (h1.total() == 0 || h2.total() == 0) {
    throw Error(ErrorCode::InvalidArgument, "chi-square test needs nonempty histograms");
  }
  const double n1 = static_cast<double>(h1.total());
  const double n2 = static_cast<double>(h2.total());
  const double smaller = std::min(n1, n2);

  std::map<Histogram::Key, std::pair<double, double>> joint;
  for (const auto& [k, c] : h1.counts()) joint[k].first += static_cast<double>(c);
  for (const auto& [k, c] : h2.counts()) joint[k].second += static_cast<double>(c);

  std::vector<std::pair<double, double>> bins;
  double a = 0.0;
  double b = 0.0;
  for (const auto& [k, ab] : joint) {
    a += ab.first;
    b += ab.second;
    if (smaller * (a + b) / (n1 + n2) >= 5.0) {
      bins.emplace_back(a, b);
      a = b = 0.0;
    }
  }
  if (a + b > 0.0) {
    if (bins.empty()) {
      bins.emplace_back(a, b);
    } else {
      bins.back().first += a;
      bins.back().second += b;
    }
  }

  if (bins.size() < 2) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.pass = true;
    r.note = "degenerate: fewer than 2 bins after merging";
    return r;
  }
  const double k1 = std::sqrt(n2 / n1);
  const double k2 = std::sqrt(n1 / n2);
  double chi2 = 0.0;
  for (const auto& [x, y] : bins) {
    const double d = k1 * x - k2 * y;
    chi2 += d * d / (x + y);
  }
  const double df = static_cast<double>(bins.size() - 1);
  r.statistic = chi2;
  r.p_value = chi2 <= 0.0 ? 1.0 : boost::math::gamma_q(df / 2.0, chi2 / 2.0);
  r.pass = *r.p_value > alpha;
  r.note = "bins=" + std::to_string(bins.size());
  return r;
}

double tv_distance(const std::map<Histogram::Key, double>& p1,
                   const std::map<Histogram::Key, double>& p2) {
  double t1 = 0.0;
  double t2 = 0.0;
  for (const auto& [k, v] : p1) t1 += v;
  for (const auto& [k, v] : p2) t2 += v;
  if (!(t1 > 0.0 && t2 > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "total variation needs nonzero totals");
  }
  std::map<Histogram::Key, std::pair<double, double>> joint;
  for (const auto& [k, v] : p1) joint[k].first = v / t1;
  for (const auto& [k, v] : p2) joint[k].second = v / t2;
  double l1 = 0.0;
  for (const auto& [k, ab] : joint) l1 += std::abs(ab.first - ab.second);
  return std::min(1.0, 0.5 * l1);
}

double tv_distance(const Histogram& h1, const Histogram& h2) {
  std::map<Histogram::Key, double> p1;
  std::map<Histogram::Key, double> p2;
  for (const auto& [k, c] : h1.counts()) p1[k] = static_cast<double>(c);
  for (const auto& [k, c] : h2.counts()) p2[k] = static_cast<double>(c);
  return tv_distance(p1, p2);
}

double spectral_radius(const SquareMatrix& m, double tol) {
  const std::size_t n = m.size();
  if (n == 0) return 0.0;
  for (double x : m.data()) {
    if (!(x >= 0.0 && std::isfinite(x))) {
      throw Error(ErrorCode::InvalidArgument, "spectral radius needs a finite nonnegative matrix");
    }
  }
  // Shifting by the identity makes the Perron root strictly dominant, so
  // periodic matrices converge too.
  std::vector<double> v(n, 1.0 / static_cast<double>(n));
  std::vector<double> w(n);
  double lambda = 0.0;
  for (int it = 0; it < 1'000'000; ++it) {
    double total = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double acc = v[r];
      for (std::size_t c = 0; c < n; ++c) acc += m(r, c) * v[c];
      w[r] = acc;
      total += acc;
      lo = std::min(lo, acc / v[r]);
      hi = std::max(hi, acc / v[r]);
    }
    const double next = total;  // v sums to one
    if (hi - lo <= tol * std::max(1.0, hi)) return std::max(0.0, 0.5 * (lo + hi) - 1.0);
    if (it > 0 && std::abs(next - lambda) <= tol * std::max(1.0, next)) {
      return std::max(0.0, next - 1.0);
    }
    lambda = next;
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      v[r] = std::max(w[r] / total, 1e-12);
      norm += v[r];
    }
    for (auto& x : v) x /= norm;
  }
  return std::max(0.0, lambda - 1.0);
}

namespace {

// Laplace transform of the measure at alpha; alpha must exceed -min rate.
double laplace(const MeanReproMeasure& mu, double alpha) {
  double v = 0.0;
  for (const auto& a : mu.atoms) v += a.mass * std::exp(-alpha * a.age);
  for (const auto& d : mu.exponential) v += d.mass * d.rate / (d.rate + alpha);
  return v;
}

// Root of a strictly decreasing h(alpha) - 1 on (floor, infinity).
template <class H>
std::optional<double> decreasing_root(H h, double floor) {
  double hi = 1.0;
  int guard = 0;
  while (h(hi) >= 1.0) {
    hi *= 2.0;
    if (++guard > 2000 || !std::isfinite(hi)) return std::nullopt;
  }
  double lo = std::isfinite(floor) ? 0.5 * floor : -1.0;
  guard = 0;
  while (h(lo) <= 1.0) {
    // Approach the pole from above, or walk left geometrically.
    lo = std::isfinite(floor) ? floor + 0.5 * (lo - floor) : 2.0 * lo;
    if (++guard > 2000 || !std::isfinite(lo)) return std::nullopt;
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double pole_of(const MeanReproMeasure& mu) {
  double floor = -std::numeric_limits<double>::infinity();
  for (const auto& d : mu.exponential) floor = std::max(floor, -d.rate);
  return floor;
}

}  // namespace

std::optional<double> malthusian_alpha(const MeanReproMeasure& mu) {
  if (mu.atoms.empty() && mu.exponential.empty()) return std::nullopt;
  double instant = 0.0;
  bool spread = !mu.exponential.empty();
  for (const auto& a : mu.atoms) {
    if (a.age < 0.0) throw Error(ErrorCode::InvalidArgument, "negative reproduction age");
    if (a.age == 0.0) {
      instant += a.mass;
    } else if (a.mass > 0.0) {
      spread = true;
    }
  }
  // Mass at age zero contributes a constant; no root if it alone reaches 1.
  if (!spread || instant >= 1.0) return std::nullopt;
  return decreasing_root([&](double a) { return laplace(mu, a); }, pole_of(mu));
}

std::optional<double> malthusian_parameter(const Model& model) {
  const std::size_t m = model.types();
  std::vector<MeanReproMeasure> rows;
  for (TypeId s = 0; s < m; ++s) rows.push_back(mean_reproduction_measure(model, s));
  if (m == 1) return malthusian_alpha(rows[0]);

  double floor = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& mu : rows) {
    floor = std::max(floor, pole_of(mu));
    any = any || !mu.atoms.empty() || !mu.exponential.empty();
  }
  if (!any) return std::nullopt;
  auto transformed = [&](double alpha) {
    SquareMatrix lm(m);
    for (TypeId s = 0; s < m; ++s) {
      for (const auto& a : rows[s].atoms) lm(s, a.child_type) += a.mass * std::exp(-alpha * a.age);
      for (const auto& d : rows[s].exponential) {
        lm(s, d.child_type) += d.mass * d.rate / (d.rate + alpha);
      }
    }
    return spectral_radius(lm, 1e-15);
  };
  return decreasing_root(transformed, floor);
}

LineFunctional line_constant(std::uint32_t generation) {
  return {"one", generation, [](std::span<const LineMember>) { return 1.0; }};
}

LineFunctional line_size(std::uint32_t generation) {
  return {"size", generation,
          [](std::span<const LineMember> line) { return static_cast<double>(line.size()); }};
}

LineFunctional line_empty(std::uint32_t generation) {
  return {"empty", generation,
          [](std::span<const LineMember> line) { return line.empty() ? 1.0 : 0.0; }};
}

TestReport importance_identity_check(const Model& model, const CareerSampler& tilted,
                                     std::span<const double> q, TypeId root,
                                     const LineFunctional& functional, std::uint64_t n_runs,
                                     std::uint64_t seed, unsigned threads) {
  const auto limits = generation_limits(functional.generation);
  ModelSampler base(model);

  const auto tilted_values =
      map_replicates(n_runs, derive_seed(seed, 1), threads, [&](std::uint64_t, Stream& rng) {
        const auto out = run_population(tilted, root, limits, rng);
        const auto line = generation_line(out, functional.generation);
        return functional.g(line);
      });
  const auto weighted_values =
      map_replicates(n_runs, derive_seed(seed, 2), threads, [&](std::uint64_t, Stream& rng) {
        const auto out = run_population(base, root, limits, rng);
        const auto line = generation_line(out, functional.generation);
        const auto types = line_types(line);
        return functional.g(line) * rn_weight(root, types, q).value();
      });

  auto report = compare_means(
      "rn." + functional.name + ".gen" + std::to_string(functional.generation),
      moments_of(tilted_values), moments_of(weighted_values), n_runs, n_runs);
  report.note = describe({{"tilted_mean", report.values[0]},
                          {"weighted_base_mean", report.values[1]}}) +
                (report.note.empty() ? "" : "; " + report.note);
  return report;
}

OutcomeSummary total_progeny_summary(std::int64_t top) {
  return {"total_progeny", [top](const PopulationOutcome& out) {
            return Histogram::Key{
                std::min<std::int64_t>(static_cast<std::int64_t>(out.total_progeny), top)};
          }};
}

OutcomeSummary first_generation_summary(std::size_t types) {
  return {"first_generation", [types](const PopulationOutcome& out) {
            Histogram::Key key(types, 0);
            for (const auto& f : out.first_generation) ++key[f.type];
            return key;
          }};
}

OutcomeSummary root_career_summary() {
  return {"root_career", [](const PopulationOutcome& out) {
            const double life = out.root_life_span.value_or(-1.0);
            return Histogram::Key{static_cast<std::int64_t>(out.first_generation.size()),
                                  std::llround(life * 1000.0)};
          }};
}

std::vector<TestReport> rejection_equivalence_check(
    const Model& model, const CareerSampler& tilted, TypeId root,
    std::span<const OutcomeSummary> summaries, std::uint64_t n_tilted, std::uint64_t n_base,
    std::uint64_t cap, std::uint64_t seed, unsigned threads) {
  SimulationLimits limits;
  limits.cap = cap;
  limits.snapshot_depth = 0;
  ModelSampler base(model);

  struct Keyed {
    bool extinct = false;
    std::vector<Histogram::Key> keys;
  };
  auto keyed = [&](const CareerSampler& sampler) {
    return [&](std::uint64_t, Stream& rng) {
      const auto out = run_population(sampler, root, limits, rng);
      Keyed k{out.extinct, {}};
      if (out.extinct) {
        for (const auto& summary : summaries) k.keys.push_back(summary.key(out));
      }
      return k;
    };
  };
  const auto base_runs = map_replicates(n_base, derive_seed(seed, 3), threads, keyed(base));
  const auto tilted_runs = map_replicates(n_tilted, derive_seed(seed, 4), threads, keyed(tilted));

  std::uint64_t tilted_censored = 0;
  for (const auto& k : tilted_runs) tilted_censored += !k.extinct;

  std::vector<TestReport> reports;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    Histogram conditioned;
    Histogram direct;
    for (const auto& k : base_runs) {
      if (k.extinct) conditioned.add(k.keys[i]);
    }
    for (const auto& k : tilted_runs) {
      if (k.extinct) direct.add(k.keys[i]);
    }
    const std::string name = "conditioned_vs_tilted." + summaries[i].name;
    if (conditioned.total() < 1000 || direct.total() == 0) {
      TestReport r;
      r.name = name;
      r.threshold = 1e-3;
      r.samples = {conditioned.total(), direct.total()};
      r.pass = false;
      r.note = "inconclusive: " + std::to_string(conditioned.total()) +
               " extinct base runs (need 1000)";
      reports.push_back(r);
      continue;
    }
    auto r = chi_square_two_sample(conditioned, direct, 1e-3, name);
    r.values = {tv_distance(conditioned, direct)};
    r.note += "; base_runs=" + std::to_string(n_base) +
              ", tilted_censored=" + std::to_string(tilted_censored);
    reports.push_back(r);
  }
  return reports;
}

TestReport rejection_equivalence_check(const Model& model, const CareerSampler& tilted,
                                       TypeId root, const OutcomeSummary& summary,
                                       std::uint64_t n_tilted, std::uint64_t n_base,
                                       std::uint64_t cap, std::uint64_t seed,
                                       unsigned threads) {
  return rejection_equivalence_check(model, tilted, root, std::span(&summary, 1), n_tilted,
                                     n_base, cap, seed, threads)
      .front();
}

std::vector<TestReport> branching_property_check(const CareerSampler& sampler, TypeId root,
                                                 std::uint32_t depth, std::uint64_t n_runs,
                                                 std::uint64_t seed, unsigned threads,
                                                 std::uint64_t min_samples,
                                                 const std::string& prefix) {
  if (depth == 0) throw Error(ErrorCode::InvalidArgument, "depth must be at least 1");
  SimulationLimits limits;
  limits.cap = kLargeCap;
  limits.snapshot_depth = 0;
  limits.max_generation = depth;

  struct Child {
    bool present = false;
    TypeId type = 0;
    std::uint64_t progeny = 0;
  };
  const auto children =
      map_replicates(n_runs, derive_seed(seed, 5), threads, [&](std::uint64_t, Stream& rng) {
        const auto out = run_population(sampler, root, limits, rng);
        if (out.first_generation.empty()) return Child{};
        const auto& f = out.first_generation.front();
        return Child{true, f.type, f.progeny};
      });

  std::map<TypeId, Histogram> subtree;
  for (const auto& c : children) {
    if (c.present) subtree[c.type].add({static_cast<std::int64_t>(c.progeny)});
  }

  std::vector<TestReport> reports;
  SimulationLimits fresh_limits = limits;
  fresh_limits.max_generation = depth - 1;
  for (const auto& [type, hist] : subtree) {
    if (hist.total() < min_samples) continue;
    const auto fresh_sizes = map_replicates(
        n_runs, derive_seed(seed, 6 + type), threads, [&, t = type](std::uint64_t, Stream& rng) {
          return run_population(sampler, t, fresh_limits, rng).total_progeny;
        });
    Histogram fresh;
    for (auto n : fresh_sizes) fresh.add({static_cast<std::int64_t>(n)});
    auto r = chi_square_two_sample(hist, fresh, 1e-3,
                                   prefix + ".subtree_vs_fresh.type" + std::to_string(type));
    r.values = {tv_distance(hist, fresh)};
    reports.push_back(std::move(r));
  }
  if (reports.empty()) {
    TestReport r;
    r.name = prefix + ".subtree_vs_fresh";
    r.pass = false;
    r.note = "inconclusive: no child type reached " + std::to_string(min_samples) + " subtrees";
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<TestReport> subcriticality_report(const TiltedModel& tilted, TypeId root,
                                              std::uint64_t n_runs, std::uint64_t seed,
                                              unsigned threads) {
  const Model& model = tilted.base();
  const auto& q = tilted.q();
  const double rho = spectral_radius(mean_matrix(model));
  std::vector<TestReport> reports;

  if (!(rho > 1.0) || !(q[root] > 0.0 && q[root] < 1.0)) {
    TestReport r;
    r.name = "subcritical";
    r.pass = true;
    r.statistic = rho;
    r.threshold = 1.0;
    r.note = "inapplicable: needs a supercritical model with 0 < q < 1 at the root (" +
             describe({{"spectral_radius", rho}, {"q_root", q[root]}}) + ")";
    return reports = {r};
  }

  const auto tilted_mean = tilted.mean_matrix();
  const double rho_tilted = spectral_radius(tilted_mean);
  {
    TestReport r;
    r.name = "subcritical.tilted_spectral_radius";
    r.statistic = rho_tilted;
    r.threshold = 1.0;
    r.values = {rho, rho_tilted};
    r.pass = rho_tilted < 1.0 && rho_tilted < rho;
    r.note = describe({{"base", rho}, {"tilted", rho_tilted}});
    reports.push_back(r);
  }

  if (model.types() == 1) {
    const double fprime = offspring_pgf_jacobian(model, q)(0, 0);
    TestReport r;
    r.name = "subcritical.fprime_at_q";
    r.statistic = fprime;
    r.threshold = 1.0;
    r.values = {fprime};
    r.pass = fprime < 1.0;
    if (tilted.has_analytic()) {
      const double direct = mean_matrix(tilted.analytic())(0, 0);
      r.values.push_back(direct);
      r.pass = r.pass && std::abs(direct - fprime) <= 1e-12;
      r.note = describe({{"f'(q)", fprime}, {"tilted_mean", direct}});
    }
    reports.push_back(r);
  }

  constexpr std::uint32_t kDepth = 5;
  SimulationLimits limits;
  limits.cap = kLargeCap;
  limits.snapshot_depth = 0;
  limits.max_generation = kDepth;
  const auto sampler = tilted.sampler();
  const auto sizes =
      map_replicates(n_runs, derive_seed(seed, 7), threads, [&](std::uint64_t, Stream& rng) {
        const auto out = run_population(*sampler, root, limits, rng);
        std::array<double, kDepth + 1> xs{};
        for (std::uint32_t n = 0; n <= kDepth; ++n) {
          xs[n] = static_cast<double>(out.generation_size(n));
        }
        return xs;
      });

  TestReport r;
  r.name = "subcritical.generation_means";
  r.threshold = kSeThreshold;
  r.samples = {n_runs};
  r.pass = true;
  std::vector<double> row(model.types(), 0.0);
  row[root] = 1.0;
  std::ostringstream note;
  note.precision(8);
  for (std::uint32_t n = 1; n <= kDepth; ++n) {
    std::vector<double> next(model.types(), 0.0);
    for (std::size_t i = 0; i < row.size(); ++i) {
      for (std::size_t j = 0; j < row.size(); ++j) next[j] += row[i] * tilted_mean(i, j);
    }
    row = next;
    double expected = 0.0;
    for (double x : row) expected += x;

    std::vector<double> column(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) column[i] = sizes[i][n];
    const auto mom = moments_of(column);
    double z = 0.0;
    if (mom.se > 0.0) {
      z = std::abs(mom.mean - expected) / mom.se;
    } else if (std::abs(mom.mean - expected) > 1e-12) {
      z = std::numeric_limits<double>::infinity();
    }
    r.statistic = std::max(r.statistic, z);
    r.values.push_back(mom.mean);
    note << (n == 1 ? "" : "; ") << "n=" << n << " mean=" << mom.mean << " expected=" << expected;
  }
  r.pass = r.statistic <= kSeThreshold;
  r.note = note.str();
  reports.push_back(r);
  return reports;
}

nlohmann::json report_to_json(const TestReport& report) {
  nlohmann::json j;
  j["name"] = report.name;
  j["statistic"] = report.statistic;
  j["p_value"] = report.p_value ? nlohmann::json(*report.p_value) : nlohmann::json(nullptr);
  j["threshold"] = report.threshold;
  j["pass"] = report.pass;
  j["samples"] = report.samples;
  j["values"] = report.values;
  j["note"] = report.note;
  return j;
}

nlohmann::json reports_to_json(std::span<const TestReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  return arr;
}

}  // namespace branching
