#pragma once

// Life kernels: the per-type law of an individual's life career, with
// samplers and the analytic summaries used by the solvers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "branching/rng.hpp"

namespace branching {

using TypeId = std::uint32_t;

struct BirthEvent {
  double age = 0.0;
  TypeId child_type = 0;
};

/// One realised life. Births are ordered by age; ties keep draw order.
struct LifeCareer {
  std::vector<BirthEvent> births;
  /// Present for splitting models (and the unit-age embedding of BGW).
  std::optional<double> life_span;

  std::size_t offspring() const { return births.size(); }
  std::vector<std::uint64_t> counts_by_type(std::size_t types) const;
};

/// One outcome of a joint offspring law: child counts per type.
struct CountOutcome {
  std::vector<std::uint32_t> counts;
  double prob = 0.0;
};

struct CountPmf {
  std::vector<CountOutcome> outcomes;
};

/// P(k children of `child_type`) = success * (1 - success)^k.
struct GeometricLaw {
  double success = 1.0;
  TypeId child_type = 0;
};

using OffspringLaw = std::variant<CountPmf, GeometricLaw>;

/// Pmf over a single nonnegative count.
using SizePmf = std::vector<std::pair<std::uint32_t, double>>;

struct BgwSpec {
  std::vector<OffspringLaw> offspring;  // one per type
};

struct LifeAtom {
  double age = 0.0;
  double prob = 0.0;
  SizePmf split;  // p_k(age)
};

/// Life-span law with finitely many atoms; splitting law may depend on age.
struct DiscreteLife {
  std::vector<LifeAtom> atoms;
};

/// Exponential life span with an age-independent splitting law.
struct ExponentialLife {
  double rate = 1.0;
  SizePmf split;
};

/// Single-type splitting process: children are all born at death.
struct SevastyanovSpec {
  std::variant<DiscreteLife, ExponentialLife> life;
};

struct AgeAtoms {
  std::vector<std::pair<double, double>> atoms;  // (age, prob)
};
struct AgeUniform {
  double lo = 0.0;
  double hi = 1.0;
};
struct AgeExponential {
  double rate = 1.0;
};
using AgeLaw = std::variant<AgeAtoms, AgeUniform, AgeExponential>;

/// Crump-Mode-Jagers career: a litter size, then i.i.d. bearing ages and
/// i.i.d. child types for each child.
struct GeneralType {
  SizePmf litter;
  AgeLaw ages;
  std::vector<double> child_types;
};

struct GeneralSpec {
  std::vector<GeneralType> types;
};

enum class Variant { Bgw, Sevastyanov, General };

struct ModelSpec {
  std::size_t types = 1;
  std::variant<BgwSpec, SevastyanovSpec, GeneralSpec> law;
  std::size_t career_cap = 10000;

  Variant variant() const { return static_cast<Variant>(law.index()); }
};

std::string to_string(Variant v);

struct Violation {
  std::string path;
  std::string message;
};

/// Empty iff the spec describes a valid model.
std::vector<Violation> validate_model(const ModelSpec& spec);

/// A validated life kernel. Immutable; sampling takes a caller-owned stream.
class Model {
 public:
  /// Throws Error(Validation) listing every violation.
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t types() const noexcept { return spec_.types; }
  Variant variant() const noexcept { return spec_.variant(); }
  std::size_t career_cap() const noexcept { return spec_.career_cap; }

  /// Overwrites `out`. Throws Error(LimitExceeded) past the career cap.
  void sample_career(TypeId s, Stream& rng, LifeCareer& out) const;

 private:
  struct Cumulative {
    std::vector<double> cum;
  };

  ModelSpec spec_;
  // Per type (or per life atom for Sevastyanov) cumulative tables.
  std::vector<Cumulative> primary_;
  std::vector<Cumulative> secondary_;
  std::vector<Cumulative> ages_;
};

LifeCareer sample_career(const Model& model, TypeId s, Stream& rng);

/// f_s(z) = E_s[ prod_{s'} z_{s'}^{#children of type s'} ].
double offspring_pgf(const Model& model, TypeId s, std::span<const double> z);

/// Row-major m x m matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0)
      : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * n_ + c];
  }
  std::span<const double> data() const noexcept { return data_; }
  double row_sum(std::size_t r) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

using MeanMatrix = SquareMatrix;

/// J[s][s'] = d f_s / d z_{s'} at z.
SquareMatrix offspring_pgf_jacobian(const Model& model, std::span<const double> z);

/// M[s][s'] = expected number of type-s' children of a type-s mother.
MeanMatrix mean_matrix(const Model& model);

struct ReproAtom {
  double age = 0.0;
  TypeId child_type = 0;
  double mass = 0.0;
};

/// Intensity mass * rate * exp(-rate t) dt.
struct ReproDensity {
  double rate = 1.0;
  TypeId child_type = 0;
  double mass = 0.0;
};

struct MeanReproMeasure {
  std::vector<ReproAtom> atoms;
  std::vector<ReproDensity> exponential;

  double total_mass() const;
};

/// Throws Error(Unsupported) for laws without a finite-atom or exponential
/// age structure.
MeanReproMeasure mean_reproduction_measure(const Model& model, TypeId s);

/// Source of life careers for the simulator.
class CareerSampler {
 public:
  virtual ~CareerSampler() = default;
  virtual std::size_t types() const = 0;
  virtual void sample(TypeId s, Stream& rng, LifeCareer& out) const = 0;
};

class ModelSampler final : public CareerSampler {
 public:
  explicit ModelSampler(const Model& model) : model_(&model) {}
  std::size_t types() const override { return model_->types(); }
  void sample(TypeId s, Stream& rng, LifeCareer& out) const override {
    model_->sample_career(s, rng, out);
  }

 private:
  const Model* model_;
};

}  // namespace branching
