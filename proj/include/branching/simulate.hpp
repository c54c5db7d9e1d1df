#pragma once

// Event-driven population simulation in real time. Individuals are realised
// in (birth time, label) order; x is realised iff t_x = t_{mx} + tau_x is
// below the horizon and the individual cap has not been reached.

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "branching/label.hpp"
#include "branching/model.hpp"
#include "branching/rng.hpp"
#include "json.hpp"

namespace branching {

struct SimulationLimits {
  std::uint64_t cap = 10000;
  double horizon = std::numeric_limits<double>::infinity();
  std::uint32_t snapshot_depth = 8;
  /// Individuals of this generation are realised but never reproduce.
  std::optional<std::uint32_t> max_generation;
};

enum class Censoring { None, Cap, Horizon, Generation };

const char* to_string(Censoring c);

struct SnapshotEntry {
  Label label;
  TypeId type = 0;
  double birth_time = 0.0;
  std::uint32_t children = 0;  // realised children
};

/// The subtree of one child of the ancestor.
struct SubtreeSummary {
  Label::Entry rank = 0;
  TypeId type = 0;
  double birth_time = 0.0;
  std::uint64_t progeny = 0;
};

struct PopulationOutcome {
  bool extinct = false;
  Censoring censoring = Censoring::None;
  std::uint64_t total_progeny = 0;
  std::optional<double> extinction_time;
  /// generation_counts[n][s] = realised generation-n individuals of type s.
  std::vector<std::vector<std::uint64_t>> generation_counts;
  std::uint32_t snapshot_depth = 0;
  /// Realised individuals of generation <= snapshot_depth, in label order.
  std::vector<SnapshotEntry> line_snapshots;
  std::vector<SubtreeSummary> first_generation;
  std::optional<double> root_life_span;

  bool censored() const { return censoring != Censoring::None; }
  std::uint64_t generation_size(std::size_t n) const;
};

PopulationOutcome run_population(const CareerSampler& sampler, TypeId root,
                                 const SimulationLimits& limits, Stream& rng);

/// Replicate 0 of `seed`.
PopulationOutcome run_population(const CareerSampler& sampler, TypeId root,
                                 const SimulationLimits& limits, std::uint64_t seed);

unsigned resolve_threads(unsigned requested);

/// results[i] = fn(first + i, Stream(seed, first + i)) for i < n, computed on
/// up to `threads` workers. The result is independent of the thread count.
template <class Fn>
auto map_replicate_range(std::uint64_t first, std::uint64_t n, std::uint64_t seed,
                         unsigned threads, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, std::uint64_t, Stream&>> {
  using Result = std::invoke_result_t<Fn&, std::uint64_t, Stream&>;
  std::vector<Result> results(n);
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads), n));
  if (workers <= 1) {
    for (std::uint64_t i = 0; i < n; ++i) {
      Stream rng(seed, first + i);
      results[i] = fn(first + i, rng);
    }
    return results;
  }

  std::atomic<std::uint64_t> next{0};
  std::mutex error_mutex;
  std::uint64_t error_index = n;
  std::exception_ptr error;
  auto work = [&] {
    for (std::uint64_t i = next++; i < n; i = next++) {
      try {
        Stream rng(seed, first + i);
        results[i] = fn(first + i, rng);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

/// Replicate r is computed from Stream(seed, r).
template <class Fn>
auto map_replicates(std::uint64_t n, std::uint64_t seed, unsigned threads, Fn&& fn) {
  return map_replicate_range(0, n, seed, threads, std::forward<Fn>(fn));
}

std::vector<PopulationOutcome> run_replicates(const CareerSampler& sampler, TypeId root,
                                              std::uint64_t n,
                                              const SimulationLimits& limits,
                                              std::uint64_t seed, unsigned threads = 0);

/// Calls sink(r, outcome) in replicate order, simulating in parallel batches.
void stream_replicates(const CareerSampler& sampler, TypeId root, std::uint64_t n,
                       const SimulationLimits& limits, std::uint64_t seed,
                       unsigned threads,
                       const std::function<void(std::uint64_t, const PopulationOutcome&)>& sink);

struct LineMember {
  Label label;
  TypeId type = 0;
  double birth_time = 0.0;
};

/// Realised generation-n individuals. Throws Error(SnapshotUnavailable) when
/// n exceeds the snapshot depth.
std::vector<LineMember> generation_line(const PopulationOutcome& outcome, std::uint32_t n);

/// Realised x with t_x > t >= t_{mx}; the ancestor alone when t < 0.
/// Throws Error(SnapshotUnavailable) when members may lie below the snapshot.
std::vector<LineMember> coming_generation_line(const PopulationOutcome& outcome, double t);

/// Realised labels of generation <= depth held in the snapshot.
LabelSet snapshot_labels(const PopulationOutcome& outcome);

std::vector<TypeId> line_types(std::span<const LineMember> line);

nlohmann::json outcome_to_json(const PopulationOutcome& outcome);

}  // namespace branching
