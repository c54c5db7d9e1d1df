#include "branching/branching.h"

#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <sstream>
#include <string>

#include "branching/error.hpp"
#include "branching/extinction.hpp"
#include "branching/model_json.hpp"
#include "branching/simulate.hpp"
#include "branching/suite.hpp"
#include "branching/tilt.hpp"
#include "branching/verify.hpp"

struct bp_model {
  branching::Model model;
  std::string variant;
};

namespace {

thread_local std::string last_error;

bp_status status_of(branching::ErrorCode code) {
  using branching::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return BP_ERR_ARGUMENT;
    case ErrorCode::Io: return BP_ERR_IO;
    case ErrorCode::Parse: return BP_ERR_PARSE;
    case ErrorCode::Validation: return BP_ERR_VALIDATION;
    case ErrorCode::Unsupported: return BP_ERR_UNSUPPORTED;
    case ErrorCode::NotConverged: return BP_ERR_NOT_CONVERGED;
    case ErrorCode::ConditioningUndefined: return BP_ERR_CONDITIONING;
    case ErrorCode::LimitExceeded: return BP_ERR_LIMIT;
    case ErrorCode::SnapshotUnavailable: return BP_ERR_SNAPSHOT;
  }
  return BP_ERR_INTERNAL;
}

template <class Fn>
bp_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return BP_OK;
  } catch (const branching::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return BP_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return BP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return BP_ERR_INTERNAL;
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw branching::Error(branching::ErrorCode::InvalidArgument, message);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

bp_model* wrap(branching::Model model) {
  const auto variant = branching::to_string(model.variant());
  return new bp_model{std::move(model), variant};
}

branching::QVector q_or_solve(const branching::Model& model, const double* q, double tol) {
  if (q != nullptr) return branching::QVector(q, q + model.types());
  return branching::solve_q(model, tol).q;
}

std::string summary_csv(const std::vector<std::vector<double>>& gen_sums, std::uint64_t runs,
                        std::uint64_t extinct, std::uint64_t censored, double progeny_sum,
                        double time_sum) {
  using branching::format_real;
  const double n = static_cast<double>(runs);
  std::ostringstream csv;
  csv << "metric,generation,type,value\n";
  csv << "runs,,," << runs << "\n";
  csv << "extinct_fraction,,," << format_real(static_cast<double>(extinct) / n) << "\n";
  csv << "censored_fraction,,," << format_real(static_cast<double>(censored) / n) << "\n";
  csv << "mean_total_progeny,,," << format_real(progeny_sum / n) << "\n";
  if (extinct > 0) {
    csv << "mean_extinction_time,,," << format_real(time_sum / static_cast<double>(extinct))
        << "\n";
  }
  for (std::size_t g = 0; g < gen_sums.size(); ++g) {
    for (std::size_t s = 0; s < gen_sums[g].size(); ++s) {
      csv << "mean_generation_size," << g << "," << s << "," << format_real(gen_sums[g][s] / n)
          << "\n";
    }
  }
  return csv.str();
}

}  // namespace

extern "C" {

const char* bp_version(void) { return BRANCHING_VERSION; }

const char* bp_last_error(void) { return last_error.c_str(); }

const char* bp_status_name(bp_status status) {
  switch (status) {
    case BP_OK: return "ok";
    case BP_ERR_ARGUMENT: return "invalid_argument";
    case BP_ERR_IO: return "io";
    case BP_ERR_PARSE: return "parse";
    case BP_ERR_VALIDATION: return "validation";
    case BP_ERR_UNSUPPORTED: return "unsupported";
    case BP_ERR_NOT_CONVERGED: return "not_converged";
    case BP_ERR_CONDITIONING: return "conditioning_undefined";
    case BP_ERR_LIMIT: return "limit_exceeded";
    case BP_ERR_SNAPSHOT: return "snapshot_unavailable";
    case BP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void bp_string_free(char* s) { std::free(s); }

bp_status bp_model_load_file(const char* path, bp_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    *out = wrap(branching::load_model_file(path));
  });
}

bp_status bp_model_load_json(const char* text, bp_model** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    *out = wrap(branching::load_model_text(text));
  });
}

void bp_model_free(bp_model* model) { delete model; }

size_t bp_model_types(const bp_model* model) { return model ? model->model.types() : 0; }

const char* bp_model_variant(const bp_model* model) {
  return model ? model->variant.c_str() : "";
}

bp_status bp_model_to_json(const bp_model* model, char** out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    *out = copy_string(branching::model_spec_to_json(model->model.spec()).dump());
  });
}

bp_status bp_solve_q(const bp_model* model, double tol, uint64_t max_iter, double* q_out,
                     bp_solve_info* info) {
  return guarded([&] {
    require(model != nullptr && q_out != nullptr, "null argument");
    require(tol > 0.0 && max_iter > 0, "tol and max_iter must be positive");
    const auto r = branching::solve_q(model->model, tol, max_iter);
    std::copy(r.q.begin(), r.q.end(), q_out);
    if (info != nullptr) {
      info->iterations = r.iterations;
      info->residual = r.residual;
      info->last_step = r.last_step;
      info->monotone = r.monotone ? 1 : 0;
    }
  });
}

bp_status bp_offspring_pgf(const bp_model* model, size_t type, const double* z, double* out) {
  return guarded([&] {
    require(model != nullptr && z != nullptr && out != nullptr, "null argument");
    require(type < model->model.types(), "type out of range");
    *out = branching::offspring_pgf(model->model, type,
                                    std::span<const double>(z, model->model.types()));
  });
}

bp_status bp_mean_matrix(const bp_model* model, double* out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    const auto m = branching::mean_matrix(model->model);
    const auto n = model->model.types();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = m(i, j);
  });
}

bp_status bp_pgf_jacobian(const bp_model* model, const double* z, double* out) {
  return guarded([&] {
    require(model != nullptr && z != nullptr && out != nullptr, "null argument");
    const auto n = model->model.types();
    const auto m = branching::offspring_pgf_jacobian(model->model, std::span<const double>(z, n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = m(i, j);
  });
}

bp_status bp_estimate_q(const bp_model* model, size_t root, uint64_t runs, uint64_t cap,
                        double horizon, uint64_t seed, unsigned threads, bp_q_estimate* out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    require(root < model->model.types(), "root type out of range");
    require(runs > 0 && cap > 0, "runs and cap must be positive");
    const auto e = branching::estimate_q_mc(model->model, root, runs, cap, horizon, seed, threads);
    *out = bp_q_estimate{e.estimate, e.ci_low, e.ci_high, e.runs, e.extinct, e.censored};
  });
}

bp_status bp_tilt(const bp_model* model, const double* q, double tol,
                  uint64_t acceptance_attempts, uint64_t seed, char** json_out) {
  return guarded([&] {
    require(model != nullptr && json_out != nullptr, "null argument");
    const branching::TiltedModel tilted(model->model, q_or_solve(model->model, q, tol));
    auto doc = branching::tilted_to_json(tilted);
    if (!tilted.has_analytic() && acceptance_attempts > 0) {
      auto rates = nlohmann::json::array();
      for (std::size_t s = 0; s < model->model.types(); ++s) {
        const auto a = branching::estimate_acceptance(model->model, tilted.q(), s,
                                                      acceptance_attempts,
                                                      branching::derive_seed(seed, s));
        rates.push_back({{"type", s}, {"attempts", a.attempts}, {"accepted", a.accepted},
                         {"rate", a.rate()}});
      }
      doc["acceptance_rate"] = rates;
    }
    *json_out = copy_string(doc.dump());
  });
}

void bp_sim_options_init(bp_sim_options* o) {
  if (o == nullptr) return;
  o->root = 0;
  o->runs = 1000;
  o->seed = 0;
  o->cap = 10000;
  o->horizon = std::numeric_limits<double>::infinity();
  o->snapshot_depth = 8;
  o->max_generation = -1;
  o->tilted = 0;
  o->method = BP_TILT_AUTO;
  o->q = nullptr;
  o->tol = 1e-12;
  o->threads = 0;
}

bp_status bp_simulate(const bp_model* model, const bp_sim_options* o, bp_record_fn sink,
                      void* ctx, char** summary_csv_out, bp_sim_summary* summary) {
  return guarded([&] {
    require(model != nullptr && o != nullptr, "null argument");
    require(o->root < model->model.types(), "root type out of range");
    require(o->runs > 0 && o->cap > 0, "runs and cap must be positive");
    require(!(o->horizon <= 0.0), "horizon must be positive");

    branching::SimulationLimits limits;
    limits.cap = o->cap;
    limits.horizon = o->horizon;
    limits.snapshot_depth = o->snapshot_depth;
    if (o->max_generation >= 0) limits.max_generation = static_cast<std::uint32_t>(o->max_generation);

    std::unique_ptr<branching::TiltedModel> tilted;
    std::unique_ptr<branching::CareerSampler> sampler;
    if (o->tilted) {
      tilted = std::make_unique<branching::TiltedModel>(model->model,
                                                        q_or_solve(model->model, o->q, o->tol));
      const auto method = o->method == BP_TILT_ANALYTIC    ? branching::TiltMethod::Analytic
                          : o->method == BP_TILT_REJECTION ? branching::TiltMethod::Rejection
                                                           : branching::TiltMethod::Auto;
      sampler = tilted->sampler(method);
    } else {
      sampler = std::make_unique<branching::ModelSampler>(model->model);
    }

    const auto types = model->model.types();
    std::vector<std::vector<double>> gen_sums;
    std::uint64_t extinct = 0;
    std::uint64_t censored = 0;
    double progeny_sum = 0.0;
    double time_sum = 0.0;
    branching::stream_replicates(
        *sampler, o->root, o->runs, limits, o->seed, o->threads,
        [&](std::uint64_t r, const branching::PopulationOutcome& out) {
          extinct += out.extinct;
          censored += out.censored();
          progeny_sum += static_cast<double>(out.total_progeny);
          if (out.extinction_time) time_sum += *out.extinction_time;
          if (gen_sums.size() < out.generation_counts.size())
            gen_sums.resize(out.generation_counts.size(), std::vector<double>(types, 0.0));
          for (std::size_t g = 0; g < out.generation_counts.size(); ++g)
            for (std::size_t s = 0; s < types; ++s)
              gen_sums[g][s] += static_cast<double>(out.generation_counts[g][s]);
          if (sink != nullptr) {
            auto rec = branching::outcome_to_json(out);
            nlohmann::json line = {{"kind", "run"}, {"replicate", r}};
            line.update(rec);
            sink(ctx, r, line.dump().c_str());
          }
        });
    if (summary != nullptr) {
      *summary = bp_sim_summary{o->runs, extinct, censored,
                                progeny_sum / static_cast<double>(o->runs)};
    }
    if (summary_csv_out != nullptr) {
      *summary_csv_out =
          copy_string(summary_csv(gen_sums, o->runs, extinct, censored, progeny_sum, time_sum));
    }
  });
}

void bp_verify_options_init(bp_verify_options* o) {
  if (o == nullptr) return;
  const branching::SuiteOptions d;
  o->suite = "all";
  o->root = d.root;
  o->runs = d.runs;
  o->seed = d.seed;
  o->cap = d.cap;
  o->tol = d.tol;
  o->threads = d.threads;
}

bp_status bp_verify(const bp_model* model, const bp_verify_options* o, char** report_json,
                    char** meta_json, int* all_pass) {
  return guarded([&] {
    require(model != nullptr && o != nullptr && report_json != nullptr, "null argument");
    branching::SuiteOptions options;
    options.root = o->root;
    options.runs = o->runs;
    options.seed = o->seed;
    options.cap = o->cap;
    options.tol = o->tol;
    options.threads = o->threads;
    const auto suite = branching::parse_suite(o->suite ? o->suite : "all");
    const auto reports = branching::run_suite(model->model, suite, options);
    bool pass = true;
    auto meta = nlohmann::json::array();
    for (const auto& r : reports) {
      pass = pass && r.pass;
      meta.push_back({{"name", r.name}, {"runtime_seconds", r.runtime_seconds}});
    }
    *report_json = copy_string(branching::reports_to_json(reports).dump(2));
    if (meta_json != nullptr) *meta_json = copy_string(meta.dump(2));
    if (all_pass != nullptr) *all_pass = pass ? 1 : 0;
  });
}

}  // extern "C"
