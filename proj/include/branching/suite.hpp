#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "branching/model.hpp"
#include "branching/verify.hpp"

namespace branching {

enum class Suite { Q, Tilt, Rn, Subcritical, Malthus, Branching, All };

/// "q", "tilt", "rn", "subcritical", "malthus", "branching" or "all".
Suite parse_suite(const std::string& name);
std::string to_string(Suite suite);

struct SuiteOptions {
  std::uint64_t runs = 20000;
  std::uint64_t seed = 0;
  std::uint64_t cap = 1000;
  TypeId root = 0;
  double tol = 1e-12;
  std::uint64_t max_iter = 1'000'000;
  unsigned threads = 0;
};

/// Runs the named checks against a model, with q from solve_q. Every
/// Monte Carlo check draws from a stream derived from options.seed.
std::vector<TestReport> run_suite(const Model& model, Suite suite, const SuiteOptions& options);

}  // namespace branching
