#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "branching/model.hpp"

namespace branching {

using QVector = std::vector<double>;

struct SolveReport {
  QVector q;
  std::size_t iterations = 0;
  /// sup-norm of q - f(q) at return.
  double residual = 0.0;
  double last_step = 0.0;
  /// Every iterate was coordinatewise >= its predecessor.
  bool monotone = true;
  /// Types with q_s == 0; conditioning on extinction is undefined for them.
  std::vector<TypeId> zero_types;
};

/// Minimal fixed point of q = f(q) by iterating from the zero vector.
/// Throws Error(NotConverged) with the residual when max_iter is exhausted.
SolveReport solve_q(const Model& model, double tol = 1e-12, std::size_t max_iter = 1'000'000);

struct QEstimate {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t runs = 0;
  std::uint64_t extinct = 0;
  std::uint64_t censored = 0;

  double censored_fraction() const {
    return runs == 0 ? 0.0 : static_cast<double>(censored) / static_cast<double>(runs);
  }
};

/// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                          double z = 1.959963984540054);

/// Fraction of simulated populations that empty before the cap or horizon;
/// censored runs count as non-extinct.
QEstimate estimate_q_mc(const Model& model, TypeId s, std::uint64_t runs, std::uint64_t cap,
                        double horizon, std::uint64_t seed, unsigned threads = 0);

}  // namespace branching
