// branchsim: batch front end to libbranching.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "branching/branching.h"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr const char* kTool = "branchsim";

// Exit 2: configuration or validation problems. Exit 1: failed verification.
struct Failure {
  int code;
  std::string message;
};

void check(bp_status status, const std::string& context) {
  if (status == BP_OK) return;
  const int code = (status == BP_ERR_INTERNAL || status == BP_ERR_NOT_CONVERGED ||
                    status == BP_ERR_LIMIT)
                       ? 1
                       : 2;
  throw Failure{code, context + ": " + bp_last_error()};
}

struct ModelHandle {
  bp_model* ptr = nullptr;
  explicit ModelHandle(const std::string& path) {
    check(bp_model_load_file(path.c_str(), &ptr), "model");
  }
  ~ModelHandle() { bp_model_free(ptr); }
  ModelHandle(const ModelHandle&) = delete;
  ModelHandle& operator=(const ModelHandle&) = delete;
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { bp_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

json real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{2, "cannot open output file " + path};
  return out;
}

json header(const std::string& command, json config) {
  return {{"tool", kTool}, {"version", bp_version()}, {"command", command}, {"config", config}};
}

std::vector<double> read_q(const std::string& source, std::size_t types) {
  std::ifstream in(source);
  if (!in) throw Failure{2, "cannot open q file " + source};
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Failure{2, "q file " + source + ": " + e.what()};
  }
  const json& arr = doc.is_object() && doc.contains("q") ? doc["q"] : doc;
  if (!arr.is_array() || arr.size() != types)
    throw Failure{2, "q file " + source + ": expected " + std::to_string(types) + " values"};
  std::vector<double> q;
  for (const auto& v : arr) {
    if (!v.is_number()) throw Failure{2, "q file " + source + ": non-numeric entry"};
    q.push_back(v.get<double>());
  }
  return q;
}

struct Common {
  std::string model;
  std::optional<unsigned> threads;
  unsigned thread_count() const { return threads.value_or(0); }
};

void add_threads(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "Worker threads (default: hardware concurrency)")
      ->check(CLI::PositiveNumber);
}

// ---- solve-q

struct SolveArgs {
  double tol = 1e-12;
  std::uint64_t max_iter = 1'000'000;
  std::string out;
};

int solve_q(const Common& c, const SolveArgs& a) {
  ModelHandle model(c.model);
  const auto n = bp_model_types(model.ptr);
  std::vector<double> q(n);
  bp_solve_info info{};
  check(bp_solve_q(model.ptr, a.tol, a.max_iter, q.data(), &info), "solve-q");
  json config = {{"model", c.model}, {"tol", a.tol}, {"max_iter", a.max_iter}};
  json rec = header("solve-q", config);
  rec["q"] = q;
  rec["residual"] = info.residual;
  rec["iterations"] = info.iterations;
  rec["monotone"] = info.monotone != 0;
  if (!a.out.empty()) open_out(a.out) << rec.dump() << "\n";

  std::ostringstream line;
  line.precision(12);
  line << "q=[";
  for (std::size_t i = 0; i < n; ++i) line << (i ? ", " : "") << q[i];
  line << "] residual=" << info.residual << " iterations=" << info.iterations;
  std::cout << line.str() << "\n";
  return 0;
}

// ---- estimate-q

struct EstimateArgs {
  std::uint64_t runs = 10000;
  std::uint64_t cap = 10000;
  double horizon = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  std::size_t root = 0;
  std::string out;
};

int estimate_q(const Common& c, const EstimateArgs& a) {
  ModelHandle model(c.model);
  bp_q_estimate e{};
  check(bp_estimate_q(model.ptr, a.root, a.runs, a.cap, a.horizon, a.seed, c.thread_count(), &e),
        "estimate-q");
  json config = {{"model", c.model}, {"runs", a.runs},        {"cap", a.cap},
                 {"horizon", real(a.horizon)}, {"seed", a.seed}, {"root", a.root}};
  json rec = header("estimate-q", config);
  rec["seed"] = a.seed;
  rec["estimate"] = e.estimate;
  rec["ci_low"] = e.ci_low;
  rec["ci_high"] = e.ci_high;
  rec["runs"] = e.runs;
  rec["extinct"] = e.extinct;
  rec["censored"] = e.censored;
  if (!a.out.empty()) open_out(a.out) << rec.dump() << "\n";
  std::printf("estimate=%.6f ci=[%.6f, %.6f] runs=%llu censored=%llu\n", e.estimate, e.ci_low,
              e.ci_high, static_cast<unsigned long long>(e.runs),
              static_cast<unsigned long long>(e.censored));
  return 0;
}

// ---- tilt

struct TiltArgs {
  std::string q = "auto";
  double tol = 1e-12;
  std::optional<std::uint64_t> seed;
  std::uint64_t attempts = 100000;
  std::string out;
};

int tilt(const Common& c, const TiltArgs& a) {
  ModelHandle model(c.model);
  const std::string variant = bp_model_variant(model.ptr);
  if (variant == "general" && !a.seed)
    throw Failure{2, "tilt on a general model estimates acceptance rates and needs --seed"};
  std::vector<double> q;
  if (a.q != "auto") q = read_q(a.q, bp_model_types(model.ptr));
  OwnedString doc;
  check(bp_tilt(model.ptr, q.empty() ? nullptr : q.data(), a.tol,
                variant == "general" ? a.attempts : 0, a.seed.value_or(0), &doc.ptr),
        "tilt");
  json config = {{"model", c.model}, {"q", a.q}, {"tol", a.tol}};
  if (variant == "general") {
    config["seed"] = *a.seed;
    config["attempts"] = a.attempts;
  }
  json rec = header("tilt", config);
  if (a.seed) rec["seed"] = *a.seed;
  rec.update(json::parse(doc.str()));
  const std::string text = rec.dump(2);
  if (a.out.empty()) {
    std::cout << text << "\n";
  } else {
    open_out(a.out) << text << "\n";
    std::cout << "tilted " << variant << " model written to " << a.out << "\n";
  }
  return 0;
}

// ---- simulate

struct SimulateArgs {
  bool tilted = false;
  std::string method = "auto";
  std::string q = "auto";
  std::uint64_t runs = 1000;
  std::optional<std::uint64_t> seed;
  std::uint64_t cap = 10000;
  double horizon = std::numeric_limits<double>::infinity();
  std::uint32_t snapshot_depth = 8;
  std::optional<std::uint32_t> max_generation;
  std::size_t root = 0;
  double tol = 1e-12;
  std::string out;
  std::string summary;
};

void write_record(void* ctx, uint64_t, const char* text) {
  *static_cast<std::ostream*>(ctx) << text << "\n";
}

int simulate(const Common& c, const SimulateArgs& a) {
  if (!a.seed) throw Failure{2, "simulate needs --seed"};
  ModelHandle model(c.model);
  std::vector<double> q;
  if (a.tilted && a.q != "auto") q = read_q(a.q, bp_model_types(model.ptr));

  bp_sim_options o;
  bp_sim_options_init(&o);
  o.root = a.root;
  o.runs = a.runs;
  o.seed = *a.seed;
  o.cap = a.cap;
  o.horizon = a.horizon;
  o.snapshot_depth = a.snapshot_depth;
  o.max_generation = a.max_generation ? static_cast<int64_t>(*a.max_generation) : -1;
  o.tilted = a.tilted ? 1 : 0;
  o.method = a.method == "analytic"    ? BP_TILT_ANALYTIC
             : a.method == "rejection" ? BP_TILT_REJECTION
                                       : BP_TILT_AUTO;
  o.q = q.empty() ? nullptr : q.data();
  o.tol = a.tol;
  o.threads = c.thread_count();

  json config = {{"model", c.model},
                 {"tilted", a.tilted},
                 {"method", a.method},
                 {"q", a.q},
                 {"runs", a.runs},
                 {"seed", *a.seed},
                 {"cap", a.cap},
                 {"horizon", real(a.horizon)},
                 {"snapshot_depth", a.snapshot_depth},
                 {"max_generation", a.max_generation ? json(*a.max_generation) : json(nullptr)},
                 {"root", a.root},
                 {"tol", a.tol}};
  json head = header("simulate", config);
  head["kind"] = "header";
  head["seed"] = *a.seed;

  std::ofstream file;
  std::ostream* sink = nullptr;
  if (!a.out.empty()) {
    file = open_out(a.out);
    file << head.dump() << "\n";
    sink = &file;
  }
  OwnedString csv;
  bp_sim_summary s{};
  check(bp_simulate(model.ptr, &o, sink ? write_record : nullptr, sink,
                    a.summary.empty() ? nullptr : &csv.ptr, &s),
        "simulate");
  if (!a.summary.empty()) {
    auto out = open_out(a.summary);
    out << "# " << head.dump() << "\n" << csv.str();
  }
  std::printf("runs=%llu extinct=%llu censored=%llu mean_total_progeny=%.4f\n",
              static_cast<unsigned long long>(s.runs), static_cast<unsigned long long>(s.extinct),
              static_cast<unsigned long long>(s.censored), s.mean_total_progeny);
  return 0;
}

// ---- verify

struct VerifyArgs {
  std::string suite = "all";
  std::uint64_t runs = 20000;
  std::optional<std::uint64_t> seed;
  std::uint64_t cap = 1000;
  std::size_t root = 0;
  double tol = 1e-12;
  std::string report;
};

int verify(const Common& c, const VerifyArgs& a) {
  if (!a.seed) throw Failure{2, "verify needs --seed"};
  ModelHandle model(c.model);
  bp_verify_options o;
  bp_verify_options_init(&o);
  o.suite = a.suite.c_str();
  o.root = a.root;
  o.runs = a.runs;
  o.seed = *a.seed;
  o.cap = a.cap;
  o.tol = a.tol;
  o.threads = c.thread_count();
  OwnedString report;
  OwnedString meta;
  int all_pass = 0;
  check(bp_verify(model.ptr, &o, &report.ptr, &meta.ptr, &all_pass), "verify");

  const auto reports = json::parse(report.str());
  if (!a.report.empty()) {
    open_out(a.report) << report.str() << "\n";
    json config = {{"model", c.model}, {"suite", a.suite}, {"runs", a.runs}, {"seed", *a.seed},
                   {"cap", a.cap},     {"root", a.root},   {"tol", a.tol}};
    json side = header("verify", config);
    side["seed"] = *a.seed;
    side["threads"] = c.threads ? json(*c.threads) : json("auto");
    side["runtimes"] = json::parse(meta.str());
    open_out(a.report + ".meta.json") << side.dump(2) << "\n";
  }
  for (const auto& r : reports) {
    std::printf("%-4s %s\n", r["pass"].get<bool>() ? "ok" : "FAIL",
                r["name"].get<std::string>().c_str());
  }
  std::printf("%s: %zu checks\n", all_pass ? "all passed" : "FAILED", reports.size());
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching processes conditioned on extinction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bp_version()));

  Common common;
  auto model_opt = [&](CLI::App* cmd) {
    cmd->add_option("--model", common.model, "Model JSON file")->required();
    add_threads(cmd, common);
  };

  SolveArgs solve;
  auto* cmd_solve = app.add_subcommand("solve-q", "Extinction probabilities by fixed-point iteration");
  model_opt(cmd_solve);
  cmd_solve->add_option("--tol", solve.tol, "Step tolerance")->capture_default_str();
  cmd_solve->add_option("--max-iter", solve.max_iter, "Iteration limit")->capture_default_str();
  cmd_solve->add_option("--out", solve.out, "JSON record file");

  EstimateArgs est;
  auto* cmd_est = app.add_subcommand("estimate-q", "Monte Carlo extinction frequency");
  model_opt(cmd_est);
  cmd_est->add_option("--runs", est.runs)->capture_default_str();
  cmd_est->add_option("--cap", est.cap)->capture_default_str();
  cmd_est->add_option("--horizon", est.horizon);
  cmd_est->add_option("--seed", est.seed)->required();
  cmd_est->add_option("--root", est.root)->capture_default_str();
  cmd_est->add_option("--out", est.out);

  TiltArgs tl;
  auto* cmd_tilt = app.add_subcommand("tilt", "Life kernel conditioned on extinction");
  model_opt(cmd_tilt);
  cmd_tilt->add_option("--q", tl.q, "q JSON file or auto")->capture_default_str();
  cmd_tilt->add_option("--tol", tl.tol)->capture_default_str();
  cmd_tilt->add_option("--seed", tl.seed, "Seed for acceptance-rate estimates");
  cmd_tilt->add_option("--attempts", tl.attempts)->capture_default_str();
  cmd_tilt->add_option("--out", tl.out);

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate replicate populations");
  model_opt(cmd_sim);
  cmd_sim->add_flag("--tilted", sim.tilted, "Simulate the process conditioned on extinction");
  cmd_sim->add_option("--method", sim.method)
      ->check(CLI::IsMember({"auto", "analytic", "rejection"}))
      ->capture_default_str();
  cmd_sim->add_option("--q", sim.q)->capture_default_str();
  cmd_sim->add_option("--runs", sim.runs)->capture_default_str();
  cmd_sim->add_option("--seed", sim.seed);
  cmd_sim->add_option("--cap", sim.cap)->capture_default_str();
  cmd_sim->add_option("--horizon", sim.horizon);
  cmd_sim->add_option("--snapshot-depth", sim.snapshot_depth)->capture_default_str();
  cmd_sim->add_option("--max-generation", sim.max_generation);
  cmd_sim->add_option("--root", sim.root)->capture_default_str();
  cmd_sim->add_option("--tol", sim.tol)->capture_default_str();
  cmd_sim->add_option("--out", sim.out, "JSON lines, one record per run");
  cmd_sim->add_option("--summary", sim.summary, "Summary CSV");

  VerifyArgs ver;
  auto* cmd_ver = app.add_subcommand("verify", "Run a verification suite");
  model_opt(cmd_ver);
  cmd_ver->add_option("--suite", ver.suite)
      ->check(CLI::IsMember({"q", "tilt", "rn", "subcritical", "malthus", "branching", "all"}))
      ->capture_default_str();
  cmd_ver->add_option("--runs", ver.runs)->capture_default_str();
  cmd_ver->add_option("--seed", ver.seed);
  cmd_ver->add_option("--cap", ver.cap)->capture_default_str();
  cmd_ver->add_option("--root", ver.root)->capture_default_str();
  cmd_ver->add_option("--tol", ver.tol)->capture_default_str();
  cmd_ver->add_option("--report", ver.report, "JSON report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_solve) return solve_q(common, solve);
    if (*cmd_est) return estimate_q(common, est);
    if (*cmd_tilt) return tilt(common, tl);
    if (*cmd_sim) return simulate(common, sim);
    if (*cmd_ver) return verify(common, ver);
  } catch (const Failure& f) {
    std::cerr << kTool << ": " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << kTool << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
