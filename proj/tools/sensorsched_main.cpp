// Command-line front end: build-mesh, synthesize, evaluate, compare, verify.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "experiment.hpp"
#include "properties.hpp"
#include "sensorsched/artifact.hpp"
#include "sensorsched/config.hpp"
#include "sensorsched/log.hpp"
#include "sensorsched/mesh.hpp"
#include "sensorsched/simulation.hpp"
#include "sensorsched/value_iteration.hpp"

namespace fs = std::filesystem;
using namespace sensorsched;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitCheckFailed = 4;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<int> threads;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> quantizer;
  std::optional<std::string> lookahead;
  std::optional<std::string> epsilon;
  std::string mesh_path;
  std::vector<std::string> policy_paths;
};

// Thrown for mismatched artifacts and bad flag values; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Timer {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ExperimentConfig LoadWithOverrides(const Options& opt) {
  if (opt.config_path.empty()) throw UsageError("--config is required");
  ExperimentConfig cfg = LoadConfig(opt.config_path);
  auto& s = cfg.synthesis;
  if (opt.epsilon) {
    s.mesh.epsilon = ParseRational(*opt.epsilon);
    cfg.epsilon_text = *opt.epsilon;
  }
  if (opt.quantizer) {
    if (*opt.quantizer == "theta") {
      s.quantizer = Quantizer::Theta;
    } else if (*opt.quantizer == "theta-pp") {
      s.quantizer = Quantizer::ThetaDoublePrime;
    } else {
      throw UsageError("--quantizer must be 'theta' or 'theta-pp'");
    }
  }
  if (opt.lookahead) {
    if (*opt.lookahead == "one") {
      s.lookahead = Lookahead::OneLevel;
    } else if (*opt.lookahead == "two") {
      s.lookahead = Lookahead::TwoLevel;
    } else {
      throw UsageError("--lookahead must be 'one' or 'two'");
    }
  }
  if (opt.threads) s.threads = *opt.threads;
  if (opt.seed) cfg.experiment.seed = *opt.seed;
  if (!opt.out_dir.empty()) cfg.output.directory = opt.out_dir;
  try {
    s.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: synthesis: ") + e.what());
  }
  return cfg;
}

fs::path MeshPath(const Options& opt, const ExperimentConfig& cfg) {
  return opt.mesh_path.empty() ? cfg.output.directory / "mesh.bin"
                               : fs::path(opt.mesh_path);
}

fs::path PolicyPath(const Options& opt, const ExperimentConfig& cfg) {
  return opt.policy_paths.empty() ? cfg.output.directory / "policy.bin"
                                  : fs::path(opt.policy_paths.front());
}

std::shared_ptr<const Mesh> LoadMatchingMesh(const fs::path& path,
                                             const ExperimentConfig& cfg) {
  MeshArtifact artifact = LoadMesh(path);
  if (!(artifact.mesh.config() == cfg.synthesis.mesh) ||
      artifact.source_hash != cfg.MeshHash()) {
    throw UsageError(path.string() +
                     " was built for a different (n, epsilon, gamma); rerun "
                     "build-mesh");
  }
  return std::make_shared<const Mesh>(std::move(artifact.mesh));
}

std::shared_ptr<const ValueTable> LoadMatchingTable(
    const fs::path& path, std::shared_ptr<const Mesh> mesh,
    const ExperimentConfig& cfg) {
  ValueTableArtifact artifact = LoadValueTable(path, std::move(mesh));
  if (artifact.header.source_hash != cfg.SynthesisHash()) {
    throw UsageError(path.string() +
                     " was synthesized from a different system or synthesis "
                     "configuration; rerun synthesize");
  }
  return std::make_shared<const ValueTable>(std::move(artifact.table));
}

std::string Label(const ExperimentConfig& cfg) {
  return "epsilon=" + cfg.epsilon_text;
}

void WarnIfUnstable(const SystemModel& model) {
  const auto report = SchurStabilityReport(model);
  if (!report.stable) {
    Warn("A is not Schur stable (spectral radius " +
         FormatFixed(report.spectral_radius, 4) +
         "); the trace bound of the perturbation lemma does not apply");
  }
}

int BuildMesh(const Options& opt) {
  const ExperimentConfig cfg = LoadWithOverrides(opt);
  const fs::path path = MeshPath(opt, cfg);
  DirectoryLock lock(path.has_parent_path() ? path.parent_path() : fs::path("."));
  if (!opt.force && fs::exists(path)) {
    throw ArtifactError(path.string() + " exists (use --force to overwrite)");
  }
  Timer timer;
  EnumerationOptions options;
  options.threads = cfg.synthesis.threads;
  const Mesh mesh = Mesh::Enumerate(cfg.synthesis.mesh, options);
  const double seconds = timer.Seconds();
  SaveMesh(path, mesh, cfg.MeshHash(), opt.force);
  std::cout << "|M(gamma)| = " << mesh.size() << "\n"
            << "n = " << cfg.synthesis.mesh.n << ", epsilon = " << cfg.epsilon_text
            << ", gamma = " << cfg.synthesis.mesh.gamma << "\n"
            << "enumeration time: " << FormatFixed(seconds, 3) << " s\n"
            << "wrote " << path.string() << "\n";
  return kExitOk;
}

int SynthesizeCmd(const Options& opt) {
  const ExperimentConfig cfg = LoadWithOverrides(opt);
  const SystemModel model = cfg.Model();
  WarnIfUnstable(model);
  const fs::path policy_path = PolicyPath(opt, cfg);
  DirectoryLock lock(policy_path.has_parent_path() ? policy_path.parent_path()
                                                   : fs::path("."));
  if (!opt.force && fs::exists(policy_path)) {
    throw ArtifactError(policy_path.string() + " exists (use --force to overwrite)");
  }
  const auto mesh = LoadMatchingMesh(MeshPath(opt, cfg), cfg);
  Timer timer;
  const auto transitions = TransitionTable::Build(model, *mesh, cfg.synthesis);
  const double build_seconds = timer.Seconds();
  const ValueTable table = Synthesize(cfg.synthesis, transitions, mesh);
  const double total_seconds = timer.Seconds();
  SaveValueTable(policy_path, table, cfg.synthesis, cfg.SynthesisHash(), opt.force);

  char bound[64];
  std::snprintf(bound, sizeof(bound), "%.10g", SuboptimalityBound(cfg.synthesis));
  std::cout << Label(cfg) << ", |M(gamma)| = " << mesh->size() << "\n"
            << "iterations_run: " << table.iterations_run << "\n"
            << "final_sup_change: " << table.final_sup_change << "\n"
            << "infeasible_count: " << table.infeasible_count << "\n"
            << "conditioning_failures: " << transitions.conditioning_failures() << "\n"
            << "suboptimality bound 2*eps*n^2/(1-beta)^2: " << bound << "\n"
            << "Lipschitz constant 1/(1-beta): "
            << LipschitzConstant(cfg.synthesis.beta) << "\n"
            << "time: transitions " << FormatFixed(build_seconds, 2) << " s, total "
            << FormatFixed(total_seconds, 2) << " s\n"
            << "wrote " << policy_path.string() << "\n";
  return kExitOk;
}

int Evaluate(const Options& opt) {
  const ExperimentConfig cfg = LoadWithOverrides(opt);
  const SystemModel model = cfg.Model();
  const auto mesh = LoadMatchingMesh(MeshPath(opt, cfg), cfg);
  const auto table = LoadMatchingTable(PolicyPath(opt, cfg), mesh, cfg);
  const Policy policy(table, model, cfg.synthesis);
  const auto& x = cfg.experiment;
  const fs::path dir = cfg.output.directory;
  DirectoryLock lock(dir);

  const int horizon = tools::DiscountHorizon(cfg, model.m());
  int violations = 0;
  CsvWriter curves(dir / "value_curves.csv", "value_curves", 1,
                   {"lambda", "trace", "value_bound", "policy_cost",
                    "truncation_bound", "holds"},
                   opt.force);
  const auto sweep = tools::LambdaSweep(model.n(), x.lambda_scale, x.lambda_count);
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const double lambda = static_cast<double>(k + 1);
    if (sweep[k].trace() > cfg.synthesis.mesh.gamma) {
      curves.Row({FormatExact(lambda), FormatExact(sweep[k].trace()), "", "", "",
                  "out_of_domain"});
      continue;
    }
    const auto check = tools::CheckValueBound(policy, sweep[k], horizon);
    if (!check.holds) ++violations;
    curves.Row({FormatExact(lambda), FormatExact(sweep[k].trace()),
                FormatExact(check.value_bound), FormatExact(check.policy_cost),
                FormatExact(check.truncation_bound), check.holds ? "1" : "0"});
  }
  curves.Close();

  CsvWriter rollout_csv(dir / "rollout.csv", "rollout", 1,
                        {"start", "t", "sensors", "trace"}, opt.force);
  CsvWriter table2(dir / "table2.csv", "table2", 1,
                   {"method", "sequence", "undiscounted_cost", "long_run_average",
                    "converged"},
                   opt.force);
  auto cycle_row = [&](const std::string& method, const tools::CycleSummary& s) {
    table2.Row({method, FormatCycle(s.cycle.cycle_actions),
                s.cycle.converged ? FormatFixed(s.cycle.average_trace_cost, 4) : "",
                FormatFixed(s.long_run_average, 4), s.cycle.converged ? "1" : "0"});
    std::cout << method << ": " << FormatCycle(s.cycle.cycle_actions) << " "
              << (s.cycle.converged ? FormatFixed(s.cycle.average_trace_cost, 4)
                                    : std::string("(no cycle)"))
              << "\n";
  };
  for (std::size_t start = 0; start < x.initial_covariances.size(); ++start) {
    const CovarianceMatrix p0(x.initial_covariances[start]);
    const auto summary = tools::RunCycle(model, policy, cfg.synthesis.cost, p0, x);
    const auto& r = summary.rollout;
    for (std::size_t t = 0; t < r.covariances.size(); ++t) {
      rollout_csv.Row({std::to_string(start), std::to_string(t),
                       t < r.actions.size() ? r.actions[t].ToString() : "",
                       FormatExact(r.covariances[t].trace())});
    }
    const std::string suffix =
        x.initial_covariances.size() > 1 ? " start=" + std::to_string(start) : "";
    cycle_row(Label(cfg) + suffix, summary);
    if (start == 0) {
      const GreedySelection greedy(model, cfg.synthesis.cost);
      cycle_row("greedy", tools::RunCycle(model, greedy, cfg.synthesis.cost, p0, x));
    }
  }
  rollout_csv.Close();
  try {
    const auto steady = SteadyStatePolicy(model);
    table2.Row({"steady-state", "{" + std::to_string(steady.best_sensor) + "}",
                FormatFixed(steady.steady_trace, 4), FormatFixed(steady.steady_trace, 4),
                "1"});
    std::cout << "steady-state: {" << steady.best_sensor << "} "
              << FormatFixed(steady.steady_trace, 4) << "\n";
  } catch (const DivergenceError& e) {
    Warn(e.what());
  }
  table2.Close();
  std::cout << "value bound violations on the lambda sweep: " << violations << "\n"
            << "wrote value_curves.csv, rollout.csv, table2.csv to " << dir.string()
            << "\n";
  return violations == 0 ? kExitOk : kExitCheckFailed;
}

int Compare(const Options& opt) {
  const ExperimentConfig base = LoadWithOverrides(opt);
  if (opt.policy_paths.empty()) throw UsageError("compare needs at least one --policy");
  const SystemModel model = base.Model();
  const fs::path dir = base.output.directory;

  struct Entry {
    ExperimentConfig cfg;
    std::shared_ptr<const Mesh> mesh;
    ValueTableArtifact artifact;
  };
  std::vector<Entry> entries;
  for (std::size_t k = 0; k < opt.policy_paths.size(); ++k) {
    const fs::path policy_path = opt.policy_paths[k];
    const fs::path mesh_path = policy_path.parent_path() / "mesh.bin";
    auto mesh = std::make_shared<const Mesh>(LoadMesh(mesh_path).mesh);
    auto artifact = LoadValueTable(policy_path, mesh);
    if (!entries.empty() && artifact.header.beta != entries.front().artifact.header.beta) {
      throw UsageError("artifacts disagree on beta: " +
                       FormatExact(artifact.header.beta) + " vs " +
                       FormatExact(entries.front().artifact.header.beta));
    }
    ExperimentConfig cfg = base;
    cfg.synthesis.mesh = mesh->config();
    if (cfg.synthesis.mesh.epsilon != base.synthesis.mesh.epsilon) {
      cfg.epsilon_text = FormatExact(cfg.synthesis.mesh.epsilon);
    }
    cfg.synthesis.beta = artifact.header.beta;
    if (artifact.header.source_hash != cfg.SynthesisHash()) {
      throw UsageError(policy_path.string() +
                       " does not match the configured system and synthesis settings");
    }
    entries.push_back({std::move(cfg), std::move(mesh), std::move(artifact)});
  }

  DirectoryLock lock(dir);
  CsvWriter out(dir / "comparison.csv", "comparison", 1,
                {"epsilon", "mesh_size", "bound", "iterations_run",
                 "infeasible_count", "value_min", "value_max", "value_mean",
                 "sequence", "undiscounted_cost", "bound_checks",
                 "bound_violations"},
                opt.force);
  int total_violations = 0;
  for (auto& e : entries) {
    const auto table = std::make_shared<const ValueTable>(std::move(e.artifact.table));
    const Policy policy(table, model, e.cfg.synthesis);
    double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0, sum = 0.0;
    std::size_t finite = 0;
    for (double v : table->values) {
      if (v == std::numeric_limits<double>::infinity()) continue;
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
      sum += v;
      ++finite;
    }
    const auto& x = e.cfg.experiment;
    const auto summary = tools::RunCycle(
        model, policy, e.cfg.synthesis.cost,
        CovarianceMatrix(x.initial_covariances.front()), x);
    auto points = tools::SampleFeasiblePoints(*table, x.sample_points, x.seed);
    for (const auto& p : tools::LambdaSweep(model.n(), x.lambda_scale, x.lambda_count)) {
      if (p.trace() <= e.cfg.synthesis.mesh.gamma) points.push_back(p);
    }
    const int horizon = tools::DiscountHorizon(e.cfg, model.m());
    int violations = 0;
    for (const auto& p : points) {
      if (!tools::CheckValueBound(policy, p, horizon).holds) ++violations;
    }
    total_violations += violations;
    char bound[64];
    std::snprintf(bound, sizeof(bound), "%.10g", SuboptimalityBound(e.cfg.synthesis));
    out.Row({e.cfg.epsilon_text, std::to_string(e.mesh->size()), bound,
             std::to_string(table->iterations_run),
             std::to_string(table->infeasible_count), FormatExact(vmin),
             FormatExact(vmax), FormatExact(finite ? sum / finite : 0.0),
             FormatCycle(summary.cycle.cycle_actions),
             summary.cycle.converged ? FormatFixed(summary.cycle.average_trace_cost, 4)
                                     : "",
             std::to_string(points.size()), std::to_string(violations)});
    std::cout << Label(e.cfg) << ": " << FormatCycle(summary.cycle.cycle_actions)
              << " " << FormatFixed(summary.cycle.average_trace_cost, 4)
              << ", bound " << bound << ", value-bound violations " << violations
              << "/" << points.size() << "\n";
  }
  out.Close();
  std::cout << "wrote " << (dir / "comparison.csv").string() << "\n";
  return total_violations == 0 ? kExitOk : kExitCheckFailed;
}

int Verify(const Options& opt) {
  const std::uint64_t seed = opt.seed.value_or(20240101);
  Timer timer;
  bool ok = true;
  for (const auto& r : tools::RunAllSuites(seed)) {
    ok = ok && r.passed();
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " (" << r.cases
              << " cases, " << r.failures << " failures)";
    if (!r.passed()) std::cout << " first: " << r.first_failure;
    std::cout << "\n";
  }
  std::cout << "seed " << seed << ", " << FormatFixed(timer.Seconds(), 2) << " s\n";
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor scheduling by point-based value iteration on a PSD mesh"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "Experiment configuration (JSON)");
  app.add_option("--out", opt.out_dir, "Output directory (overrides the config)");
  app.add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--force", opt.force, "Overwrite existing outputs");
  app.add_option("--seed", opt.seed, "Seed for sampled checks and property suites");
  app.add_option("--quantizer", opt.quantizer, "theta | theta-pp")
      ->check(CLI::IsMember({"theta", "theta-pp"}));
  app.add_option("--lookahead", opt.lookahead, "one | two")
      ->check(CLI::IsMember({"one", "two"}));
  app.add_option("--epsilon", opt.epsilon, "Mesh resolution, e.g. 0.5 or 3/7");
  app.add_option("--mesh", opt.mesh_path, "Mesh artifact path");
  app.add_option("--policy", opt.policy_paths, "Policy artifact path(s)");

  int (*handler)(const Options&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    app.add_subcommand(name, help)->fallthrough()->callback([&handler, fn] {
      handler = fn;
    });
  };
  sub("build-mesh", "Enumerate the mesh and write it", BuildMesh);
  sub("synthesize", "Run value iteration on a mesh and write the value table",
      SynthesizeCmd);
  sub("evaluate", "Write value_curves.csv, rollout.csv and table2.csv", Evaluate);
  sub("compare", "Compare policies synthesized at several resolutions", Compare);
  sub("verify", "Run the randomized property suites", Verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  try {
    return handler(opt);
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const AssumptionViolationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const std::invalid_argument& e) {  // ConfigError, SpecificationError, ..
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
