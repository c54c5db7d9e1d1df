#include "branching/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "branching/error.hpp"

namespace branching {

namespace {

constexpr double kSumTolerance = 1e-12;

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

std::string counts_key(const std::vector<std::uint32_t>& counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i != 0) out += ',';
    out += std::to_string(counts[i]);
  }
  return out;
}

class Checker {
 public:
  void fail(std::string path, std::string message) {
    out_.push_back({std::move(path), std::move(message)});
  }

  void probability(const std::string& path, double p) {
    if (!std::isfinite(p)) {
      fail(path, "probability is not finite");
    } else if (p < 0.0) {
      fail(path, "negative probability " + fmt(p));
    }
  }

  void sums_to_one(const std::string& path, double sum) {
    if (std::abs(sum - 1.0) > kSumTolerance) fail(path, "pmf sums to " + fmt(sum));
  }

  void size_pmf(const std::string& path, const SizePmf& pmf, std::size_t cap) {
    if (pmf.empty()) {
      fail(path, "empty support");
      return;
    }
    double sum = 0.0;
    for (const auto& [k, p] : pmf) {
      const std::string at = path + "/" + std::to_string(k);
      probability(at, p);
      if (k > cap && p > 0.0) {
        fail(at, "outcome exceeds career cap " + std::to_string(cap));
      }
      sum += p;
    }
    sums_to_one(path, sum);
  }

  std::vector<Violation> take() { return std::move(out_); }

 private:
  std::vector<Violation> out_;
};

template <class Pairs>
std::vector<double> cumulative_of(const Pairs& pairs) {
  std::vector<double> cum;
  double acc = 0.0;
  for (const auto& pr : pairs) {
    acc += pr.second;
    cum.push_back(acc);
  }
  return cum;
}

double size_pmf_mean(const SizePmf& pmf) {
  double m = 0.0;
  for (const auto& [k, p] : pmf) m += p * k;
  return m;
}

double size_pmf_pgf(const SizePmf& pmf, double z) {
  double f = 0.0;
  for (const auto& [k, p] : pmf) f += p * std::pow(z, static_cast<double>(k));
  return f;
}

double size_pmf_pgf_derivative(const SizePmf& pmf, double z) {
  double d = 0.0;
  for (const auto& [k, p] : pmf) {
    if (k > 0) d += p * k * std::pow(z, static_cast<double>(k - 1));
  }
  return d;
}

void check_z(const Model& model, std::span<const double> z) {
  if (z.size() != model.types()) {
    throw Error(ErrorCode::InvalidArgument,
                "argument has " + std::to_string(z.size()) +
                    " entries, model has " + std::to_string(model.types()) +
                    " types");
  }
}

void check_type(const Model& model, TypeId s) {
  if (s >= model.types()) {
    throw Error(ErrorCode::InvalidArgument,
                "type " + std::to_string(s) + " out of range");
  }
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Bgw: return "bgw";
    case Variant::Sevastyanov: return "sevastyanov";
    case Variant::General: return "general";
  }
  return "unknown";
}

std::vector<std::uint64_t> LifeCareer::counts_by_type(std::size_t types) const {
  std::vector<std::uint64_t> counts(types, 0);
  for (const auto& b : births) ++counts[b.child_type];
  return counts;
}

double SquareMatrix::row_sum(std::size_t r) const {
  return std::accumulate(data_.begin() + r * n_, data_.begin() + (r + 1) * n_, 0.0);
}

double MeanReproMeasure::total_mass() const {
  double t = 0.0;
  for (const auto& a : atoms) t += a.mass;
  for (const auto& d : exponential) t += d.mass;
  return t;
}

std::vector<Violation> validate_model(const ModelSpec& spec) {
  Checker check;
  const std::size_t m = spec.types;
  const std::size_t cap = spec.career_cap;
  if (m == 0) check.fail("/types", "type count must be at least 1");
  if (cap == 0) check.fail("/career_cap", "career cap must be at least 1");

  std::visit(
      Overloaded{
          [&](const BgwSpec& bgw) {
            if (bgw.offspring.size() != m) {
              check.fail("/offspring", "expected " + std::to_string(m) +
                                           " offspring laws, found " +
                                           std::to_string(bgw.offspring.size()));
            }
            for (std::size_t s = 0; s < bgw.offspring.size(); ++s) {
              const std::string path = "/offspring/" + std::to_string(s);
              if (const auto* geo = std::get_if<GeometricLaw>(&bgw.offspring[s])) {
                if (!(geo->success > 0.0 && geo->success <= 1.0)) {
                  check.fail(path + "/geometric",
                             "success probability must lie in (0, 1]");
                }
                if (geo->child_type >= m) {
                  check.fail(path + "/child_type", "child type out of range");
                }
                continue;
              }
              const auto& pmf = std::get<CountPmf>(bgw.offspring[s]);
              if (pmf.outcomes.empty()) {
                check.fail(path, "empty support");
                continue;
              }
              double sum = 0.0;
              for (const auto& o : pmf.outcomes) {
                const std::string at = path + "/" + counts_key(o.counts);
                if (o.counts.size() != m) {
                  check.fail(at, "count vector has " +
                                     std::to_string(o.counts.size()) +
                                     " entries, expected " + std::to_string(m));
                }
                check.probability(at, o.prob);
                const auto total = std::accumulate(o.counts.begin(), o.counts.end(),
                                                   std::uint64_t{0});
                if (total > cap && o.prob > 0.0) {
                  check.fail(at, "outcome exceeds career cap " + std::to_string(cap));
                }
                sum += o.prob;
              }
              check.sums_to_one(path, sum);
            }
          },
          [&](const SevastyanovSpec& sev) {
            if (m != 1) check.fail("/types", "splitting models are single-type");
            if (const auto* exp_life = std::get_if<ExponentialLife>(&sev.life)) {
              if (!(exp_life->rate > 0.0 && std::isfinite(exp_life->rate))) {
                check.fail("/life_span/exponential", "rate must be positive");
              }
              check.size_pmf("/split", exp_life->split, cap);
              return;
            }
            const auto& life = std::get<DiscreteLife>(sev.life);
            if (life.atoms.empty()) {
              check.fail("/life_span", "empty support");
              return;
            }
            double sum = 0.0;
            std::vector<double> seen;
            for (const auto& atom : life.atoms) {
              const std::string at = "/life_span/" + fmt(atom.age);
              if (!(atom.age >= 0.0 && std::isfinite(atom.age))) {
                check.fail(at, "life span must be finite and nonnegative");
              }
              if (std::find(seen.begin(), seen.end(), atom.age) != seen.end()) {
                check.fail(at, "duplicate life span atom");
              }
              seen.push_back(atom.age);
              check.probability(at, atom.prob);
              sum += atom.prob;
              check.size_pmf("/split/" + fmt(atom.age), atom.split, cap);
            }
            check.sums_to_one("/life_span", sum);
          },
          [&](const GeneralSpec& gen) {
            if (gen.types.size() != m) {
              check.fail("/careers", "expected " + std::to_string(m) +
                                         " career laws, found " +
                                         std::to_string(gen.types.size()));
            }
            for (std::size_t s = 0; s < gen.types.size(); ++s) {
              const std::string path = "/careers/" + std::to_string(s);
              const auto& t = gen.types[s];
              check.size_pmf(path + "/litter", t.litter, cap);
              std::visit(
                  Overloaded{
                      [&](const AgeAtoms& a) {
                        if (a.atoms.empty()) {
                          check.fail(path + "/ages", "empty support");
                          return;
                        }
                        double sum = 0.0;
                        for (const auto& [age, p] : a.atoms) {
                          const std::string at = path + "/ages/" + fmt(age);
                          if (!(age >= 0.0 && std::isfinite(age))) {
                            check.fail(at, "age must be finite and nonnegative");
                          }
                          check.probability(at, p);
                          sum += p;
                        }
                        check.sums_to_one(path + "/ages", sum);
                      },
                      [&](const AgeUniform& u) {
                        if (!(u.lo >= 0.0 && u.lo <= u.hi && std::isfinite(u.hi))) {
                          check.fail(path + "/ages/uniform",
                                     "need 0 <= lo <= hi < infinity");
                        }
                      },
                      [&](const AgeExponential& e) {
                        if (!(e.rate > 0.0 && std::isfinite(e.rate))) {
                          check.fail(path + "/ages/exponential",
                                     "rate must be positive");
                        }
                      }},
                  t.ages);
              if (t.child_types.size() != m) {
                check.fail(path + "/child_types",
                           "expected " + std::to_string(m) + " type probabilities");
              }
              double sum = 0.0;
              for (std::size_t j = 0; j < t.child_types.size(); ++j) {
                check.probability(path + "/child_types/" + std::to_string(j),
                                  t.child_types[j]);
                sum += t.child_types[j];
              }
              check.sums_to_one(path + "/child_types", sum);
            }
          }},
      spec.law);
  return check.take();
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  auto violations = validate_model(spec_);
  if (!violations.empty()) {
    std::string msg = "invalid model:";
    for (const auto& v : violations) msg += "\n  " + v.path + ": " + v.message;
    throw Error(ErrorCode::Validation, msg);
  }

  std::visit(
      Overloaded{
          [&](const BgwSpec& bgw) {
            for (const auto& law : bgw.offspring) {
              Cumulative c;
              if (const auto* pmf = std::get_if<CountPmf>(&law)) {
                double acc = 0.0;
                for (const auto& o : pmf->outcomes) c.cum.push_back(acc += o.prob);
              }
              primary_.push_back(std::move(c));
            }
          },
          [&](const SevastyanovSpec& sev) {
            if (const auto* e = std::get_if<ExponentialLife>(&sev.life)) {
              secondary_.push_back({cumulative_of(e->split)});
              return;
            }
            Cumulative g;
            double acc = 0.0;
            for (const auto& atom : std::get<DiscreteLife>(sev.life).atoms) {
              g.cum.push_back(acc += atom.prob);
              secondary_.push_back({cumulative_of(atom.split)});
            }
            primary_.push_back(std::move(g));
          },
          [&](const GeneralSpec& gen) {
            for (const auto& t : gen.types) {
              primary_.push_back({cumulative_of(t.litter)});
              Cumulative types;
              double acc = 0.0;
              for (double p : t.child_types) types.cum.push_back(acc += p);
              secondary_.push_back(std::move(types));
              Cumulative ages;
              if (const auto* a = std::get_if<AgeAtoms>(&t.ages)) {
                ages.cum = cumulative_of(a->atoms);
              }
              ages_.push_back(std::move(ages));
            }
          }},
      spec_.law);
}

void Model::sample_career(TypeId s, Stream& rng, LifeCareer& out) const {
  check_type(*this, s);
  out.births.clear();
  out.life_span.reset();
  const std::size_t cap = spec_.career_cap;

  auto cap_exceeded = [&](double n) {
    throw Error(ErrorCode::LimitExceeded,
                "career of type " + std::to_string(s) + " drew " + fmt(n) +
                    " children, cap is " + std::to_string(cap));
  };

  switch (variant()) {
    case Variant::Bgw: {
      const auto& law = std::get<BgwSpec>(spec_.law).offspring[s];
      out.life_span = 1.0;
      if (const auto* geo = std::get_if<GeometricLaw>(&law)) {
        double k = 0.0;
        if (geo->success < 1.0) {
          k = std::floor(std::log(rng.uniform_positive()) / std::log1p(-geo->success));
        }
        if (k > static_cast<double>(cap)) cap_exceeded(k);
        out.births.assign(static_cast<std::size_t>(k), BirthEvent{1.0, geo->child_type});
        return;
      }
      const auto& pmf = std::get<CountPmf>(law);
      const auto& o = pmf.outcomes[rng.categorical(primary_[s].cum)];
      for (TypeId t = 0; t < o.counts.size(); ++t) {
        for (std::uint32_t i = 0; i < o.counts[t]; ++i) out.births.push_back({1.0, t});
      }
      return;
    }
    case Variant::Sevastyanov: {
      const auto& sev = std::get<SevastyanovSpec>(spec_.law);
      double life = 0.0;
      std::uint32_t k = 0;
      if (const auto* e = std::get_if<ExponentialLife>(&sev.life)) {
        life = rng.exponential(e->rate);
        k = e->split[rng.categorical(secondary_[0].cum)].first;
      } else {
        const auto& atoms = std::get<DiscreteLife>(sev.life).atoms;
        const std::size_t i = rng.categorical(primary_[0].cum);
        life = atoms[i].age;
        k = atoms[i].split[rng.categorical(secondary_[i].cum)].first;
      }
      out.life_span = life;
      out.births.assign(k, BirthEvent{life, 0});
      return;
    }
    case Variant::General: {
      const auto& t = std::get<GeneralSpec>(spec_.law).types[s];
      const std::uint32_t n = t.litter[rng.categorical(primary_[s].cum)].first;
      out.births.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        double age = 0.0;
        if (const auto* a = std::get_if<AgeAtoms>(&t.ages)) {
          age = a->atoms[rng.categorical(ages_[s].cum)].first;
        } else if (const auto* u = std::get_if<AgeUniform>(&t.ages)) {
          age = u->lo + (u->hi - u->lo) * rng.uniform();
        } else {
          age = rng.exponential(std::get<AgeExponential>(t.ages).rate);
        }
        const auto child = static_cast<TypeId>(rng.categorical(secondary_[s].cum));
        out.births.push_back({age, child});
      }
      std::stable_sort(out.births.begin(), out.births.end(),
                       [](const BirthEvent& a, const BirthEvent& b) { return a.age < b.age; });
      return;
    }
  }
}

LifeCareer sample_career(const Model& model, TypeId s, Stream& rng) {
  LifeCareer out;
  model.sample_career(s, rng, out);
  return out;
}

double offspring_pgf(const Model& model, TypeId s, std::span<const double> z) {
  check_type(model, s);
  check_z(model, z);
  const auto& spec = model.spec();
  switch (model.variant()) {
    case Variant::Bgw: {
      const auto& law = std::get<BgwSpec>(spec.law).offspring[s];
      if (const auto* geo = std::get_if<GeometricLaw>(&law)) {
        return geo->success / (1.0 - (1.0 - geo->success) * z[geo->child_type]);
      }
      double f = 0.0;
      for (const auto& o : std::get<CountPmf>(law).outcomes) {
        double term = o.prob;
        for (std::size_t t = 0; t < o.counts.size(); ++t) {
          term *= std::pow(z[t], static_cast<double>(o.counts[t]));
        }
        f += term;
      }
      return f;
    }
    case Variant::Sevastyanov: {
      const auto& sev = std::get<SevastyanovSpec>(spec.law);
      if (const auto* e = std::get_if<ExponentialLife>(&sev.life)) {
        return size_pmf_pgf(e->split, z[0]);
      }
      double f = 0.0;
      for (const auto& atom : std::get<DiscreteLife>(sev.life).atoms) {
        f += atom.prob * size_pmf_pgf(atom.split, z[0]);
      }
      return f;
    }
    case Variant::General: {
      const auto& t = std::get<GeneralSpec>(spec.law).types[s];
      double mark = 0.0;
      for (std::size_t j = 0; j < t.child_types.size(); ++j) mark += t.child_types[j] * z[j];
      return size_pmf_pgf(t.litter, mark);
    }
  }
  return 0.0;
}

SquareMatrix offspring_pgf_jacobian(const Model& model, std::span<const double> z) {
  check_z(model, z);
  const std::size_t m = model.types();
  const auto& spec = model.spec();
  SquareMatrix jac(m);
  for (TypeId s = 0; s < m; ++s) {
    switch (model.variant()) {
      case Variant::Bgw: {
        const auto& law = std::get<BgwSpec>(spec.law).offspring[s];
        if (const auto* geo = std::get_if<GeometricLaw>(&law)) {
          const double r = 1.0 - geo->success;
          const double den = 1.0 - r * z[geo->child_type];
          jac(s, geo->child_type) = geo->success * r / (den * den);
          break;
        }
        for (const auto& o : std::get<CountPmf>(law).outcomes) {
          for (std::size_t j = 0; j < m; ++j) {
            if (o.counts[j] == 0) continue;
            double term = o.prob * o.counts[j];
            for (std::size_t t = 0; t < m; ++t) {
              const double power = t == j ? o.counts[t] - 1.0 : o.counts[t];
              term *= std::pow(z[t], power);
            }
            jac(s, j) += term;
          }
        }
        break;
      }
      case Variant::Sevastyanov: {
        const auto& sev = std::get<SevastyanovSpec>(spec.law);
        if (const auto* e = std::get_if<ExponentialLife>(&sev.life)) {
          jac(0, 0) = size_pmf_pgf_derivative(e->split, z[0]);
        } else {
          for (const auto& atom : std::get<DiscreteLife>(sev.life).atoms) {
            jac(0, 0) += atom.prob * size_pmf_pgf_derivative(atom.split, z[0]);
          }
        }
        break;
      }
      case Variant::General: {
        const auto& t = std::get<GeneralSpec>(spec.law).types[s];
        double mark = 0.0;
        for (std::size_t j = 0; j < m; ++j) mark += t.child_types[j] * z[j];
        const double d = size_pmf_pgf_derivative(t.litter, mark);
        for (std::size_t j = 0; j < m; ++j) jac(s, j) = d * t.child_types[j];
        break;
      }
    }
  }
  return jac;
}

MeanMatrix mean_matrix(const Model& model) {
  const std::vector<double> ones(model.types(), 1.0);
  return offspring_pgf_jacobian(model, ones);
}

MeanReproMeasure mean_reproduction_measure(const Model& model, TypeId s) {
  check_type(model, s);
  const auto& spec = model.spec();
  MeanReproMeasure mu;
  std::map<std::pair<double, TypeId>, double> atoms;

  switch (model.variant()) {
    case Variant::Bgw: {
      const auto mean = mean_matrix(model);
      for (TypeId j = 0; j < model.types(); ++j) atoms[{1.0, j}] += mean(s, j);
      break;
    }
    case Variant::Sevastyanov: {
      const auto& sev = std::get<SevastyanovSpec>(spec.law);
      if (const auto* e = std::get_if<ExponentialLife>(&sev.life)) {
        const double mass = size_pmf_mean(e->split);
        if (mass > 0.0) mu.exponential.push_back({e->rate, 0, mass});
        break;
      }
      for (const auto& atom : std::get<DiscreteLife>(sev.life).atoms) {
        atoms[{atom.age, 0}] += atom.prob * size_pmf_mean(atom.split);
      }
      break;
    }
    case Variant::General: {
      const auto& t = std::get<GeneralSpec>(spec.law).types[s];
      const double litter_mean = size_pmf_mean(t.litter);
      if (const auto* a = std::get_if<AgeAtoms>(&t.ages)) {
        for (const auto& [age, p] : a->atoms) {
          for (TypeId j = 0; j < model.types(); ++j) {
            atoms[{age, j}] += litter_mean * t.child_types[j] * p;
          }
        }
      } else if (const auto* e = std::get_if<AgeExponential>(&t.ages)) {
        for (TypeId j = 0; j < model.types(); ++j) {
          const double mass = litter_mean * t.child_types[j];
          if (mass > 0.0) mu.exponential.push_back({e->rate, j, mass});
        }
      } else {
        throw Error(ErrorCode::Unsupported,
                    "mean reproduction measure needs atomic or exponential bearing ages");
      }
      break;
    }
  }
  for (const auto& [key, mass] : atoms) {
    if (mass > 0.0) mu.atoms.push_back({key.first, key.second, mass});
  }
  return mu;
}

}  // namespace branching
