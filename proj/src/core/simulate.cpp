#include "branching/simulate.hpp"

#include <algorithm>
#include <map>
#include <queue>

#include "branching/error.hpp"
#include "branching/model_json.hpp"

namespace branching {

namespace {

constexpr std::int64_t kNone = -1;

struct Node {
  std::int64_t parent = kNone;
  Label::Entry rank = 0;
  std::uint32_t generation = 0;
  TypeId type = 0;
  double birth_time = 0.0;
  std::int64_t subtree = kNone;   // index into first_generation
  std::int64_t snapshot = kNone;  // index into line_snapshots
};

class Arena {
 public:
  std::vector<Node> nodes;

  // Label order between two pending individuals: generation, then entries.
  bool label_less(std::int64_t a, std::int64_t b) const {
    if (nodes[a].generation != nodes[b].generation) {
      return nodes[a].generation < nodes[b].generation;
    }
    if (a == b) return false;
    while (nodes[a].parent != nodes[b].parent) {
      a = nodes[a].parent;
      b = nodes[b].parent;
    }
    return nodes[a].rank < nodes[b].rank;
  }

  Label label_of(std::int64_t i) const {
    std::vector<Label::Entry> path(nodes[i].generation);
    for (auto k = path.size(); k > 0; --k) {
      path[k - 1] = nodes[i].rank;
      i = nodes[i].parent;
    }
    return Label(std::move(path));
  }
};

}  // namespace

const char* to_string(Censoring c) {
  switch (c) {
    case Censoring::None: return "none";
    case Censoring::Cap: return "cap";
    case Censoring::Horizon: return "horizon";
    case Censoring::Generation: return "generation";
  }
  return "unknown";
}

std::uint64_t PopulationOutcome::generation_size(std::size_t n) const {
  if (n >= generation_counts.size()) return 0;
  std::uint64_t total = 0;
  for (auto c : generation_counts[n]) total += c;
  return total;
}

PopulationOutcome run_population(const CareerSampler& sampler, TypeId root,
                                 const SimulationLimits& limits, Stream& rng) {
  const std::size_t m = sampler.types();
  if (root >= m) throw Error(ErrorCode::InvalidArgument, "root type out of range");
  if (limits.cap == 0) throw Error(ErrorCode::InvalidArgument, "cap must be at least 1");

  PopulationOutcome out;
  out.snapshot_depth = limits.snapshot_depth;

  Arena arena;
  auto later = [&arena](std::int64_t a, std::int64_t b) {
    const auto& na = arena.nodes[a];
    const auto& nb = arena.nodes[b];
    if (na.birth_time != nb.birth_time) return na.birth_time > nb.birth_time;
    return arena.label_less(b, a);
  };
  std::priority_queue<std::int64_t, std::vector<std::int64_t>, decltype(later)> pending(later);

  arena.nodes.push_back(Node{kNone, 0, 0, root, 0.0, kNone, kNone});
  pending.push(0);

  LifeCareer career;
  double end_time = 0.0;
  bool dropped_by_horizon = false;
  bool stopped_by_generation = false;

  while (!pending.empty()) {
    if (out.total_progeny == limits.cap) {
      out.censoring = Censoring::Cap;
      break;
    }
    const std::int64_t idx = pending.top();
    pending.pop();
    Node node = arena.nodes[idx];
    ++out.total_progeny;

    if (out.generation_counts.size() <= node.generation) {
      out.generation_counts.resize(node.generation + 1, std::vector<std::uint64_t>(m, 0));
    }
    ++out.generation_counts[node.generation][node.type];

    if (node.generation == 1) {
      node.subtree = static_cast<std::int64_t>(out.first_generation.size());
      out.first_generation.push_back({node.rank, node.type, node.birth_time, 0});
    }
    if (node.subtree != kNone) ++out.first_generation[node.subtree].progeny;

    if (node.generation <= limits.snapshot_depth) {
      node.snapshot = static_cast<std::int64_t>(out.line_snapshots.size());
      out.line_snapshots.push_back({Label{}, node.type, node.birth_time, 0});
      if (node.parent != kNone) {
        ++out.line_snapshots[arena.nodes[node.parent].snapshot].children;
      }
    }
    arena.nodes[idx] = node;

    if (limits.max_generation && node.generation >= *limits.max_generation) {
      stopped_by_generation = true;
      continue;
    }

    sampler.sample(node.type, rng, career);
    if (idx == 0) out.root_life_span = career.life_span;
    double end = node.birth_time;
    if (career.life_span) {
      end += *career.life_span;
    } else if (!career.births.empty()) {
      end += career.births.back().age;
    }
    end_time = std::max(end_time, end);

    for (std::size_t k = 0; k < career.births.size(); ++k) {
      const double t = node.birth_time + career.births[k].age;
      if (!(t < limits.horizon)) {
        dropped_by_horizon = true;
        continue;
      }
      arena.nodes.push_back(Node{idx, static_cast<Label::Entry>(k + 1), node.generation + 1,
                                 career.births[k].child_type, t, node.subtree, kNone});
      pending.push(static_cast<std::int64_t>(arena.nodes.size() - 1));
    }
  }

  if (out.censoring == Censoring::None) {
    if (dropped_by_horizon) {
      out.censoring = Censoring::Horizon;
    } else if (stopped_by_generation) {
      out.censoring = Censoring::Generation;
    } else {
      out.extinct = true;
      out.extinction_time = end_time;
    }
  }

  // Labels are materialised only for snapshot members.
  for (std::size_t i = 0; i < arena.nodes.size(); ++i) {
    const auto snap = arena.nodes[i].snapshot;
    if (snap != kNone) out.line_snapshots[snap].label = arena.label_of(static_cast<std::int64_t>(i));
  }
  std::sort(out.line_snapshots.begin(), out.line_snapshots.end(),
            [](const SnapshotEntry& a, const SnapshotEntry& b) { return a.label < b.label; });
  std::sort(out.first_generation.begin(), out.first_generation.end(),
            [](const SubtreeSummary& a, const SubtreeSummary& b) { return a.rank < b.rank; });
  return out;
}

PopulationOutcome run_population(const CareerSampler& sampler, TypeId root,
                                 const SimulationLimits& limits, std::uint64_t seed) {
  Stream rng(seed, 0);
  return run_population(sampler, root, limits, rng);
}

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::vector<PopulationOutcome> run_replicates(const CareerSampler& sampler, TypeId root,
                                              std::uint64_t n,
                                              const SimulationLimits& limits,
                                              std::uint64_t seed, unsigned threads) {
  return map_replicates(n, seed, threads, [&](std::uint64_t, Stream& rng) {
    return run_population(sampler, root, limits, rng);
  });
}

void stream_replicates(const CareerSampler& sampler, TypeId root, std::uint64_t n,
                       const SimulationLimits& limits, std::uint64_t seed,
                       unsigned threads,
                       const std::function<void(std::uint64_t, const PopulationOutcome&)>& sink) {
  const std::uint64_t batch = std::max<std::uint64_t>(256, 64ull * resolve_threads(threads));
  for (std::uint64_t first = 0; first < n; first += batch) {
    const auto count = std::min(batch, n - first);
    auto outcomes = map_replicate_range(first, count, seed, threads,
                                        [&](std::uint64_t, Stream& rng) {
                                          return run_population(sampler, root, limits, rng);
                                        });
    for (std::uint64_t i = 0; i < count; ++i) sink(first + i, outcomes[i]);
  }
}

std::vector<LineMember> generation_line(const PopulationOutcome& outcome, std::uint32_t n) {
  if (n > outcome.snapshot_depth) {
    throw Error(ErrorCode::SnapshotUnavailable,
                "generation " + std::to_string(n) + " is beyond snapshot depth " +
                    std::to_string(outcome.snapshot_depth));
  }
  std::vector<LineMember> line;
  for (const auto& e : outcome.line_snapshots) {
    if (e.label.generation() == n) line.push_back({e.label, e.type, e.birth_time});
  }
  return line;
}

std::vector<LineMember> coming_generation_line(const PopulationOutcome& outcome, double t) {
  if (outcome.line_snapshots.empty()) {
    throw Error(ErrorCode::SnapshotUnavailable, "outcome carries no snapshot");
  }
  if (t < 0.0) {
    const auto& root = outcome.line_snapshots.front();
    return {LineMember{root.label, root.type, root.birth_time}};
  }
  std::map<Label, double> born;
  for (const auto& e : outcome.line_snapshots) {
    born.emplace(e.label, e.birth_time);
    if (e.label.generation() == outcome.snapshot_depth && e.birth_time <= t && e.children > 0) {
      throw Error(ErrorCode::SnapshotUnavailable,
                  "coming generation at t=" + format_real(t) +
                      " extends below the snapshot depth");
    }
  }
  std::vector<LineMember> line;
  for (const auto& e : outcome.line_snapshots) {
    if (e.label.is_root() || !(e.birth_time > t)) continue;
    if (born.at(mother(e.label)) <= t) line.push_back({e.label, e.type, e.birth_time});
  }
  return line;
}

LabelSet snapshot_labels(const PopulationOutcome& outcome) {
  LabelSet out;
  for (const auto& e : outcome.line_snapshots) out.insert(e.label);
  return out;
}

std::vector<TypeId> line_types(std::span<const LineMember> line) {
  std::vector<TypeId> types;
  types.reserve(line.size());
  for (const auto& x : line) types.push_back(x.type);
  return types;
}

nlohmann::json outcome_to_json(const PopulationOutcome& outcome) {
  using nlohmann::json;
  json j;
  j["extinct"] = outcome.extinct;
  j["censored"] = outcome.censored();
  j["censoring"] = to_string(outcome.censoring);
  j["total_progeny"] = outcome.total_progeny;
  j["extinction_time"] =
      outcome.extinction_time ? json(*outcome.extinction_time) : json(nullptr);
  j["generation_counts"] = outcome.generation_counts;
  json snaps = json::array();
  for (const auto& e : outcome.line_snapshots) {
    snaps.push_back({{"label", e.label.path()},
                     {"type", e.type},
                     {"birth_time", e.birth_time},
                     {"children", e.children}});
  }
  j["snapshot_depth"] = outcome.snapshot_depth;
  j["line_snapshots"] = std::move(snaps);
  json first = json::array();
  for (const auto& f : outcome.first_generation) {
    first.push_back({{"rank", f.rank},
                     {"type", f.type},
                     {"birth_time", f.birth_time},
                     {"progeny", f.progeny}});
  }
  j["first_generation"] = std::move(first);
  j["root_life_span"] = outcome.root_life_span ? json(*outcome.root_life_span) : json(nullptr);
  return j;
}

}  // namespace branching
