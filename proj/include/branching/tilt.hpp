#pragma once

// The life kernel of the process conditioned on extinction. A career with
// children of types sigma(1..X) is reweighted by prod_k q_{sigma(k)} / q_s.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "branching/extinction.hpp"
#include "branching/model.hpp"
#include "json.hpp"

namespace branching {

/// p~(k) = p(k) prod_{s'} q_{s'}^{k_{s'}} / q_s. Normalised by the reweighted
/// mass f_s(q), which equals q_s at the fixed point.
/// Throws Error(ConditioningUndefined) when q_s == 0.
CountPmf tilt_offspring_pmf(const CountPmf& pmf, std::span<const double> q, TypeId s);

/// Tilted geometric law; stays geometric with success 1 - (1 - p) q_c.
GeometricLaw tilt_geometric(const GeometricLaw& law, std::span<const double> q, TypeId s);

/// Single-type size pmf: p~_k = p_k q^{k-1} / sum_i p_i q^{i-1}.
SizePmf tilt_size_pmf(const SizePmf& pmf, double q);

/// G~(u) proportional to G(u) sum_k p_k(u) q^{k-1}; p~_k(u) as in
/// tilt_size_pmf at each atom. Throws on q <= 0 or an unconditionable atom.
DiscreteLife tilt_sevastyanov(const DiscreteLife& life, double q);
/// Age-independent splitting: G~ = G.
ExponentialLife tilt_sevastyanov(const ExponentialLife& life, double q);

enum class TiltMethod { Auto, Analytic, Rejection };

class TiltedModel {
 public:
  /// q is taken as given, never recomputed.
  TiltedModel(Model base, QVector q);

  const Model& base() const noexcept { return base_; }
  const QVector& q() const noexcept { return q_; }
  bool conditionable(TypeId s) const { return s < q_.size() && q_[s] > 0.0; }

  bool has_analytic() const noexcept { return analytic_.has_value(); }
  /// Throws Error(Unsupported) for sampler-only models.
  const Model& analytic() const;

  /// Tilted mean matrix M~[s][s'] = (df_s/dz_{s'})(q) q_{s'} / q_s, with zero
  /// rows for types that cannot be conditioned.
  MeanMatrix mean_matrix() const;

  /// Throws Error(ConditioningUndefined) for q_s == 0 roots and
  /// Error(Unsupported) when the analytic route is requested but missing.
  std::unique_ptr<CareerSampler> sampler(TiltMethod method = TiltMethod::Auto) const;

 private:
  Model base_;
  QVector q_;
  std::optional<Model> analytic_;
};

/// Rejection sampler: draw from P(s, .), accept with prob prod_k q_{sigma(k)}.
class RejectionSampler final : public CareerSampler {
 public:
  static constexpr std::uint64_t kWatchdog = 10'000'000;

  RejectionSampler(const Model& model, QVector q);

  std::size_t types() const override { return model_->types(); }
  void sample(TypeId s, Stream& rng, LifeCareer& out) const override;
  /// Same as sample, returns the number of attempts.
  std::uint64_t sample_counting(TypeId s, Stream& rng, LifeCareer& out) const;

  /// log prod_k q_{sigma(k)}; -inf if some child type has q == 0.
  double log_acceptance(const LifeCareer& career) const;

 private:
  const Model* model_;
  QVector q_;
  std::vector<double> log_q_;
};

struct TiltedDraw {
  LifeCareer career;
  std::uint64_t attempts = 0;
};

TiltedDraw tilted_career_sampler(const Model& model, std::span<const double> q, TypeId s,
                                 Stream& rng);

struct AcceptanceEstimate {
  std::uint64_t attempts = 0;
  std::uint64_t accepted = 0;
  double rate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempts);
  }
};

/// Single-attempt acceptance frequency; its mean is q_s.
AcceptanceEstimate estimate_acceptance(const Model& model, std::span<const double> q,
                                       TypeId s, std::uint64_t attempts, std::uint64_t seed);

struct RnWeight {
  double log_weight = 0.0;
  double value() const { return std::exp(log_weight); }
};

/// (1/q_s) prod_{x in L cap R} q_{sigma_x}. Throws Error(ConditioningUndefined)
/// when q_s == 0.
RnWeight rn_weight(TypeId s, std::span<const TypeId> line_types, std::span<const double> q);

/// Tilted parameters, q and method as a JSON document.
nlohmann::json tilted_to_json(const TiltedModel& tilted);

}  // namespace branching
