#include "branching/tilt.hpp"

#include <sstream>

#include "branching/error.hpp"
#include "branching/model_json.hpp"

namespace branching {

namespace {

void require_conditionable(std::span<const double> q, TypeId s) {
  if (s >= q.size()) throw Error(ErrorCode::InvalidArgument, "type out of range");
  if (!(q[s] > 0.0)) {
    throw Error(ErrorCode::ConditioningUndefined,
                "extinction has probability 0 from type " + std::to_string(s) +
                    "; conditioning is undefined");
  }
}

}  // namespace

CountPmf tilt_offspring_pmf(const CountPmf& pmf, std::span<const double> q, TypeId s) {
  require_conditionable(q, s);
  CountPmf out;
  double mass = 0.0;
  for (const auto& o : pmf.outcomes) {
    if (o.counts.size() != q.size()) {
      throw Error(ErrorCode::InvalidArgument, "count vector does not match q");
    }
    double log_w = 0.0;
    for (std::size_t t = 0; t < q.size(); ++t) {
      if (o.counts[t] > 0) log_w += o.counts[t] * std::log(q[t]);
    }
    const double p = o.prob * std::exp(log_w);
    out.outcomes.push_back({o.counts, p});
    mass += p;
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::ConditioningUndefined,
                "offspring law of type " + std::to_string(s) + " has no extinguishable outcome");
  }
  for (auto& o : out.outcomes) o.prob /= mass;
  return out;
}

GeometricLaw tilt_geometric(const GeometricLaw& law, std::span<const double> q, TypeId s) {
  require_conditionable(q, s);
  return GeometricLaw{1.0 - (1.0 - law.success) * q[law.child_type], law.child_type};
}

SizePmf tilt_size_pmf(const SizePmf& pmf, double q) {
  if (!(q > 0.0)) {
    throw Error(ErrorCode::ConditioningUndefined, "conditioning on extinction needs q > 0");
  }
  SizePmf out;
  double mass = 0.0;
  for (const auto& [k, p] : pmf) {
    const double w = p * std::pow(q, static_cast<double>(k) - 1.0);
    out.emplace_back(k, w);
    mass += w;
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::ConditioningUndefined, "splitting law has no extinguishable outcome");
  }
  for (auto& [k, p] : out) p /= mass;
  return out;
}

DiscreteLife tilt_sevastyanov(const DiscreteLife& life, double q) {
  if (!(q > 0.0)) {
    throw Error(ErrorCode::ConditioningUndefined, "conditioning on extinction needs q > 0");
  }
  DiscreteLife out;
  double total = 0.0;
  for (const auto& atom : life.atoms) {
    double w = 0.0;
    for (const auto& [k, p] : atom.split) w += p * std::pow(q, static_cast<double>(k) - 1.0);
    if (!(w > 0.0)) {
      std::ostringstream msg;
      msg << "life span " << atom.age << " cannot be conditioned on extinction";
      throw Error(ErrorCode::ConditioningUndefined, msg.str());
    }
    out.atoms.push_back({atom.age, atom.prob * w, tilt_size_pmf(atom.split, q)});
    total += atom.prob * w;
  }
  for (auto& atom : out.atoms) atom.prob /= total;
  return out;
}

ExponentialLife tilt_sevastyanov(const ExponentialLife& life, double q) {
  return ExponentialLife{life.rate, tilt_size_pmf(life.split, q)};
}

TiltedModel::TiltedModel(Model base, QVector q) : base_(std::move(base)), q_(std::move(q)) {
  if (q_.size() != base_.types()) {
    throw Error(ErrorCode::InvalidArgument, "q has " + std::to_string(q_.size()) +
                                                " entries, model has " +
                                                std::to_string(base_.types()) + " types");
  }
  for (double v : q_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "q entries must lie in [0, 1]");
    }
  }
  bool any = false;
  for (double v : q_) any = any || v > 0.0;
  if (!any) {
    throw Error(ErrorCode::ConditioningUndefined, "extinction is impossible from every type");
  }

  ModelSpec spec = base_.spec();
  switch (base_.variant()) {
    case Variant::Bgw: {
      auto& laws = std::get<BgwSpec>(spec.law).offspring;
      for (TypeId s = 0; s < laws.size(); ++s) {
        if (!conditionable(s)) continue;  // never reached under the tilted law
        if (auto* geo = std::get_if<GeometricLaw>(&laws[s])) {
          *geo = tilt_geometric(*geo, q_, s);
        } else {
          laws[s] = tilt_offspring_pmf(std::get<CountPmf>(laws[s]), q_, s);
        }
      }
      analytic_.emplace(std::move(spec));
      break;
    }
    case Variant::Sevastyanov: {
      auto& sev = std::get<SevastyanovSpec>(spec.law);
      if (auto* e = std::get_if<ExponentialLife>(&sev.life)) {
        sev.life = tilt_sevastyanov(*e, q_[0]);
      } else {
        sev.life = tilt_sevastyanov(std::get<DiscreteLife>(sev.life), q_[0]);
      }
      analytic_.emplace(std::move(spec));
      break;
    }
    case Variant::General:
      break;
  }
}

const Model& TiltedModel::analytic() const {
  if (!analytic_) {
    throw Error(ErrorCode::Unsupported,
                to_string(base_.variant()) + " models are tilted by rejection only");
  }
  return *analytic_;
}

MeanMatrix TiltedModel::mean_matrix() const {
  const auto jac = offspring_pgf_jacobian(base_, q_);
  const std::size_t m = base_.types();
  MeanMatrix out(m);
  for (std::size_t s = 0; s < m; ++s) {
    if (!conditionable(static_cast<TypeId>(s))) continue;
    for (std::size_t j = 0; j < m; ++j) out(s, j) = jac(s, j) * q_[j] / q_[s];
  }
  return out;
}

std::unique_ptr<CareerSampler> TiltedModel::sampler(TiltMethod method) const {
  if (method == TiltMethod::Rejection || (method == TiltMethod::Auto && !analytic_)) {
    return std::make_unique<RejectionSampler>(base_, q_);
  }
  return std::make_unique<ModelSampler>(analytic());
}

RejectionSampler::RejectionSampler(const Model& model, QVector q)
    : model_(&model), q_(std::move(q)) {
  if (q_.size() != model.types()) {
    throw Error(ErrorCode::InvalidArgument, "q does not match the model's type count");
  }
  for (double v : q_) log_q_.push_back(std::log(v));
}

double RejectionSampler::log_acceptance(const LifeCareer& career) const {
  double w = 0.0;
  for (const auto& b : career.births) w += log_q_[b.child_type];
  return w;
}

std::uint64_t RejectionSampler::sample_counting(TypeId s, Stream& rng, LifeCareer& out) const {
  require_conditionable(q_, s);
  for (std::uint64_t attempt = 1; attempt <= kWatchdog; ++attempt) {
    model_->sample_career(s, rng, out);
    if (rng.uniform() < std::exp(log_acceptance(out))) return attempt;
  }
  throw Error(ErrorCode::LimitExceeded,
              "rejection sampler for type " + std::to_string(s) + " accepted nothing in " +
                  std::to_string(kWatchdog) + " attempts (q_s = " + format_real(q_[s]) + ")");
}

void RejectionSampler::sample(TypeId s, Stream& rng, LifeCareer& out) const {
  sample_counting(s, rng, out);
}

TiltedDraw tilted_career_sampler(const Model& model, std::span<const double> q, TypeId s,
                                 Stream& rng) {
  RejectionSampler sampler(model, QVector(q.begin(), q.end()));
  TiltedDraw draw;
  draw.attempts = sampler.sample_counting(s, rng, draw.career);
  return draw;
}

AcceptanceEstimate estimate_acceptance(const Model& model, std::span<const double> q,
                                       TypeId s, std::uint64_t attempts, std::uint64_t seed) {
  RejectionSampler sampler(model, QVector(q.begin(), q.end()));
  require_conditionable(q, s);
  Stream rng(seed, 0);
  LifeCareer career;
  AcceptanceEstimate est;
  est.attempts = attempts;
  for (std::uint64_t i = 0; i < attempts; ++i) {
    model.sample_career(s, rng, career);
    if (rng.uniform() < std::exp(sampler.log_acceptance(career))) ++est.accepted;
  }
  return est;
}

RnWeight rn_weight(TypeId s, std::span<const TypeId> line_types, std::span<const double> q) {
  require_conditionable(q, s);
  RnWeight w;
  w.log_weight = -std::log(q[s]);
  for (TypeId t : line_types) {
    if (t >= q.size()) throw Error(ErrorCode::InvalidArgument, "line member type out of range");
    w.log_weight += std::log(q[t]);
  }
  return w;
}

nlohmann::json tilted_to_json(const TiltedModel& tilted) {
  nlohmann::json doc;
  doc["variant"] = to_string(tilted.base().variant());
  doc["q"] = tilted.q();
  std::vector<bool> cond;
  for (TypeId s = 0; s < tilted.q().size(); ++s) cond.push_back(tilted.conditionable(s));
  doc["conditionable"] = cond;
  doc["method"] = tilted.has_analytic() ? "analytic" : "rejection";
  doc["tilted_model"] =
      tilted.has_analytic() ? model_spec_to_json(tilted.analytic().spec()) : nlohmann::json(nullptr);
  const auto mean = tilted.mean_matrix();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < mean.size(); ++r) {
    std::vector<double> row;
    for (std::size_t c = 0; c < mean.size(); ++c) row.push_back(mean(r, c));
    rows.push_back(row);
  }
  doc["tilted_mean_matrix"] = std::move(rows);
  return doc;
}

}  // namespace branching
