#include "seqtoa/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "seqtoa/analysis.hpp"
#include "seqtoa/baselines.hpp"
#include "seqtoa/error.hpp"
#include "seqtoa/estimator.hpp"
#include "seqtoa/io.hpp"
#include "seqtoa/montecarlo.hpp"

namespace seqtoa {

namespace {

struct CliConfig {
  std::string input_path;
  std::string output_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::string> overrides;
  std::string estimator = "proposed";
};

io::Json load(const CliConfig& cfg) {
  io::Json doc = io::read_document(cfg.input_path);
  for (const std::string& kv : cfg.overrides) io::apply_override(doc, kv);
  return doc;
}

void emit(const CliConfig& cfg, const io::Json& doc, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (cfg.output_path.empty()) {
    out << text;
  } else {
    io::write_text(cfg.output_path, text);
  }
}

// Prints diagnostics and returns true when any of them is an error.
bool report_diagnostics(const Scenario& scn, std::ostream& err) {
  const auto diags = validate_scenario(scn);
  for (const Diagnostic& d : diags) {
    err << (d.severity == Severity::kError ? "error" : "warning") << " [" << d.code
        << "]: " << d.message << '\n';
  }
  return has_errors(diags);
}

int cmd_estimate(const CliConfig& cfg, std::ostream& out) {
  const io::FrameDocument doc = io::frame_from_json(load(cfg));
  EstimateReport report;
  if (cfg.estimator == "proposed") {
    report = estimate(doc.frame);
  } else if (cfg.estimator == "proposed_static") {
    report = estimate(doc.frame, {.model = MotionModel::kStatic});
  } else if (cfg.estimator == "tswls_static") {
    const StaticTswlsResult r = tswls_static_estimate(doc.frame);
    if (!r.ok) throw EstimationError(ErrorKind::kConditioning, "tswls_static: " + r.failure);
    report.estimator = "tswls_static";
    report.state = r.as_state();
    report.iterations = 1;
    report.converged = true;
    report.wls_covariance = r.covariance;
  } else {
    MleConfig mle;
    mle.init = estimate(doc.frame).state;
    report = mle_estimate(doc.frame, mle);
  }
  emit(cfg, io::to_json(report), out);
  return kExitOk;
}

int cmd_simulate(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const Scenario scn = io::scenario_from_json(load(cfg)).to_scenario();
  if (report_diagnostics(scn, err)) return kExitInput;
  const ObservedFrame frame = simulate_frame(scn, cfg.seed);
  emit(cfg, io::to_json(frame, scn.target), out);
  return kExitOk;
}

int cmd_crlb(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const Scenario scn = io::scenario_from_json(load(cfg)).to_scenario();
  if (report_diagnostics(scn, err)) return kExitInput;
  emit(cfg, io::to_json(crlb_target(scn)), out);
  return kExitOk;
}

void print_summary(const ExperimentSpec& spec, const ExperimentResult& result, std::ostream& out) {
  const char* axis = spec.scheme == Scheme::kLtcoSweep ? "T [m]" : "sigma_s^2 [dB]";
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-13s %14s %14s %9s %8s %8s %8s\n", axis, "estimator",
                "mse_pos [m2]", "crlb_pos [m2]", "ratio", "success", "diverged", "failed");
  out << line;
  for (const SweepPoint& p : result.points) {
    for (const EstimatorStats& e : p.estimators) {
      const TrialStats& s = e.stats;
      std::snprintf(line, sizeof line, "%-16.6g %-13s %14.6g %14.6g %9.4g %8d %8d %8d\n",
                    p.sweep_value, e.estimator.c_str(), s.mse_position, s.crlb_trace_position,
                    s.mse_position / s.crlb_trace_position, s.n_success, s.n_diverged,
                    s.n_failed);
      out << line;
    }
  }
}

int cmd_experiment(const CliConfig& cfg, bool seed_given, std::ostream& out) {
  ExperimentSpec spec = io::experiment_from_json(load(cfg));
  if (seed_given) spec.base_seed = cfg.seed;

  const ExperimentResult result = run_trials(spec, cfg.threads);

  const std::filesystem::path dir = cfg.output_path.empty() ? "." : cfg.output_path;
  std::filesystem::create_directories(dir);
  std::ostringstream sweep;
  std::ostringstream cdf;
  io::write_sweep_csv(sweep, result);
  io::write_cdf_csv(cdf, result);
  const auto sweep_path = dir / (spec.name + "_sweep.csv");
  const auto cdf_path = dir / (spec.name + "_cdf.csv");
  io::write_text(sweep_path.string(), sweep.str());
  io::write_text(cdf_path.string(), cdf.str());

  print_summary(spec, result, out);
  out << "wrote " << sweep_path.string() << " and " << cdf_path.string() << '\n';
  return kExitOk;
}

void add_common(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("-i,--input", cfg.input_path, "Input JSON file")->required();
  cmd->add_option("-o,--output", cfg.output_path, "Output file (default: standard output)");
  cmd->add_option("--set", cfg.overrides,
                  "Override a config field before validation, e.g. --set n_trials=100 "
                  "or --set bounds.sigma_tau_sq_db=-20 (repeatable)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"Joint position, velocity and clock estimation of a moving target from "
               "sequential TOA broadcasts"};
  app.name("seqtoa");
  app.require_subcommand(1);

  CLI::App* est = app.add_subcommand("estimate", "Estimate the target state from a frame file");
  add_common(est, cfg);
  est->add_option("--estimator", cfg.estimator, "Estimator to run (mle starts from the proposed estimate)")
      ->check(CLI::IsMember({"proposed", "proposed_static", "tswls_static", "mle"}))
      ->capture_default_str();

  CLI::App* sim = app.add_subcommand("simulate", "Draw one noisy frame from a scenario file");
  add_common(sim, cfg);
  sim->add_option("--seed", cfg.seed, "Noise seed")->capture_default_str();

  CLI::App* crlb = app.add_subcommand("crlb", "Cramer-Rao bound of the target state for a scenario file");
  add_common(crlb, cfg);

  CLI::App* exp = app.add_subcommand(
      "experiment", "Run a Monte-Carlo experiment spec; --output is a directory receiving "
                    "<name>_sweep.csv and <name>_cdf.csv (default: current directory)");
  add_common(exp, cfg);
  CLI::Option* seed_opt = exp->add_option("--seed", cfg.seed, "Replace the spec's base_seed");
  CLI::Option* threads_opt =
      exp->add_option("--threads", cfg.threads,
                      "Worker threads (0: hardware concurrency); default from SEQTOA_THREADS")
          ->check(CLI::NonNegativeNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    const char* env_threads = std::getenv("SEQTOA_THREADS");
    if (exp->parsed() && threads_opt->count() == 0 && env_threads != nullptr) {
      const std::string text = env_threads;
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), cfg.threads);
      if (ec != std::errc() || end != text.data() + text.size() || cfg.threads < 0) {
        throw CLI::ValidationError("SEQTOA_THREADS", "expected a non-negative integer, got '" + text + "'");
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (est->parsed()) return cmd_estimate(cfg, out);
    if (sim->parsed()) return cmd_simulate(cfg, out, err);
    if (crlb->parsed()) return cmd_crlb(cfg, out, err);
    return cmd_experiment(cfg, seed_opt->count() > 0, out);
  } catch (const EstimationError& e) {
    err << "estimation failed (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kExitEstimation;
  } catch (const io::SchemaError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace seqtoa
