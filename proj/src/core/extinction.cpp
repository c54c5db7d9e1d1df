#include "branching/extinction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "branching/error.hpp"
#include "branching/simulate.hpp"

namespace branching {

namespace {

QVector apply_pgf(const Model& model, const QVector& z) {
  QVector next(z.size());
  for (TypeId s = 0; s < z.size(); ++s) {
    next[s] = std::clamp(offspring_pgf(model, s, z), 0.0, 1.0);
  }
  return next;
}

double sup_distance(const QVector& a, const QVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// One Newton step on q - f(q) = 0 from the converged iterate. The iterates
// approach the minimal root from below, so the step is kept only if it moves
// upward, stays in [0, 1] and lowers the residual.
void newton_polish(const Model& model, QVector& q, double& residual) {
  const auto n = q.size();
  const auto fq = apply_pgf(model, q);
  const auto jac = offspring_pgf_jacobian(model, q);
  Eigen::MatrixXd a(n, n);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) = (i == j ? 1.0 : 0.0) - jac(i, j);
    b(i) = fq[i] - q[i];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) return;
  const Eigen::VectorXd delta = lu.solve(b);
  QVector candidate(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(delta(i)) || delta(i) < 0.0) return;
    candidate[i] = std::min(1.0, q[i] + delta(i));
  }
  const double r = sup_distance(candidate, apply_pgf(model, candidate));
  if (r < residual) {
    q = std::move(candidate);
    residual = r;
  }
}

}  // namespace

SolveReport solve_q(const Model& model, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  SolveReport report;
  QVector q(model.types(), 0.0);
  double step = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (it < max_iter) {
    QVector next = apply_pgf(model, q);
    ++it;
    for (std::size_t s = 0; s < q.size(); ++s) {
      if (next[s] < q[s]) report.monotone = false;
    }
    step = sup_distance(next, q);
    q = std::move(next);
    if (step < tol) break;
  }
  report.iterations = it;
  report.last_step = step;
  report.residual = sup_distance(q, apply_pgf(model, q));
  if (step < tol) newton_polish(model, q, report.residual);
  report.q = q;
  if (!(step < tol)) {
    std::ostringstream msg;
    msg << "fixed-point iteration did not converge in " << max_iter
        << " iterations (residual " << report.residual << ", last step " << step << ")";
    throw Error(ErrorCode::NotConverged, msg.str());
  }
  for (TypeId s = 0; s < q.size(); ++s) {
    if (q[s] == 0.0) report.zero_types.push_back(s);
  }
  return report;
}

std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                          double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

QEstimate estimate_q_mc(const Model& model, TypeId s, std::uint64_t runs, std::uint64_t cap,
                        double horizon, std::uint64_t seed, unsigned threads) {
  ModelSampler sampler(model);
  SimulationLimits limits;
  limits.cap = cap;
  limits.horizon = horizon;
  limits.snapshot_depth = 0;

  struct Flags {
    bool extinct = false;
    bool censored = false;
  };
  const auto flags = map_replicates(runs, seed, threads, [&](std::uint64_t, Stream& rng) {
    const auto out = run_population(sampler, s, limits, rng);
    return Flags{out.extinct, out.censored()};
  });

  QEstimate est;
  est.runs = runs;
  for (const auto& f : flags) {
    est.extinct += f.extinct;
    est.censored += f.censored;
  }
  est.estimate = runs == 0 ? 0.0 : static_cast<double>(est.extinct) / static_cast<double>(runs);
  std::tie(est.ci_low, est.ci_high) = wilson_interval(est.extinct, runs);
  return est;
}

}  // namespace branching
