// dtc: command-line front end for identifiability checks, distributed
// completion, rank sweeps, experiments and communication audits.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dtc/admm.hpp"
#include "dtc/dataset.hpp"
#include "dtc/experiment.hpp"
#include "dtc/identifiability.hpp"
#include "dtc/runtime.hpp"

namespace {

constexpr int kExitIdentifiability = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitInput = 4;

struct Overrides {
  std::string config;
  std::optional<std::string> dataset;
  std::optional<std::size_t> rank;
  std::optional<double> mu;
  std::optional<double> lambda;
  std::optional<std::size_t> max_iters;
  std::optional<double> kkt_tol;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::optional<std::uint64_t> noise_seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> output;
  std::optional<std::string> score;
  bool strict = false;
  bool normalize = false;
  bool no_normalize = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dataset", dataset, "Dataset CSV replacing the config's dataset");
    cmd->add_option("--rank", rank, "CPD rank F");
    cmd->add_option("--mu", mu, "B consensus penalty");
    cmd->add_option("--lambda", lambda, "C consensus penalty");
    cmd->add_option("--max-iters", max_iters, "ADMM iteration limit");
    cmd->add_option("--kkt-tol", kkt_tol, "Stopping tolerance on all KKT residuals");
    cmd->add_option("--seed", seed, "Solver seed");
    cmd->add_option("--noise", noise, "Relative noise level on observed entries");
    cmd->add_option("--noise-seed", noise_seed, "Noise seed");
    cmd->add_option("--threads", threads, "Worker threads for per-area updates");
    cmd->add_option("-o,--output", output, "Output directory");
    cmd->add_option("--score", score, "Scored entries")->check(CLI::IsMember({"unobserved", "all"}));
    cmd->add_flag("--strict", strict, "Abort when the identifiability check fails");
    cmd->add_flag("--normalize", normalize, "Remove per-row temporal means before solving");
    cmd->add_flag("--no-normalize", no_normalize, "Solve on the raw observations");
  }

  dtc::ExperimentConfig load() const {
    dtc::ExperimentConfig cfg = dtc::ExperimentConfig::load(config);
    if (dataset) {
      cfg.dataset.kind = dtc::DatasetSpec::Kind::File;
      cfg.dataset.path = *dataset;
    }
    if (rank) cfg.solver.rank = *rank;
    if (mu) cfg.solver.penalty_mu = *mu;
    if (lambda) cfg.solver.penalty_lambda = *lambda;
    if (max_iters) cfg.solver.max_iters = *max_iters;
    if (kkt_tol) cfg.solver.kkt_tol = *kkt_tol;
    if (seed) cfg.solver.seed = *seed;
    if (noise) cfg.noise_rel_std = *noise;
    if (noise_seed) cfg.noise_seed = *noise_seed;
    if (threads) cfg.solver.threads = *threads;
    if (output) cfg.output = *output;
    if (score) cfg.score = *score == "all" ? dtc::ScoreSet::All : dtc::ScoreSet::Unobserved;
    if (strict) cfg.strict = true;
    if (normalize) cfg.normalize = true;
    if (no_normalize) cfg.normalize = false;
    if (cfg.noise_rel_std < 0.0) throw dtc::ArgumentError("--noise must be nonnegative");
    cfg.solver.validate();
    return cfg;
  }
};

void print_metrics(const dtc::MetricsReport& m) {
  auto show = [](const char* name, const std::optional<double>& v) {
    if (v) std::cout << "  " << name << ": " << *v << '\n';
  };
  std::cout << "metrics (" << (m.scored == dtc::ScoreSet::All ? "all" : "unobserved") << " entries, n="
            << m.scored_entries << ")\n"
            << "  relative_error: " << m.relative_error << '\n'
            << "  relative_mae: " << m.relative_mae << '\n';
  show("mape_vmag_pct", m.mape_vmag_pct);
  show("mae_angle_deg", m.mae_angle_deg);
  show("mae_p", m.mae_p);
  show("mae_q", m.mae_q);
}

void print_solver(const dtc::DistributedResult& r) {
  std::cout << "solver: " << r.iterations << " iterations, "
            << (r.converged ? "converged" : "iteration limit reached") << '\n';
  if (!r.trace.rows.empty()) {
    const auto& row = r.trace.rows.back();
    std::cout << "  objective " << row.objective << ", consensus B " << row.max_consensus_B
              << ", consensus C " << row.max_consensus_C << ", stationarity " << row.max_stationarity
              << '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dtc::ArgumentError("cannot write '" + path.string() + "'");
  out << text;
}

int cmd_check(const Overrides& o) {
  const dtc::ExperimentConfig cfg = o.load();
  const dtc::PreparedExperiment prep = dtc::prepare_experiment(cfg);
  const dtc::Dims3 dims = prep.dataset.truth.dims();
  const dtc::SamplingScheme scheme = dtc::resolve_sampling(cfg.sampling, prep.partition, dims);
  const auto verdict = dtc::check_identifiability(prep.partition, scheme, cfg.solver.rank, dims);
  std::cout << verdict.render();
  return verdict.verdict ? 0 : kExitIdentifiability;
}

int cmd_solve(const Overrides& o) {
  const dtc::ExperimentConfig cfg = o.load();
  const dtc::PreparedExperiment prep = dtc::prepare_experiment(cfg);
  const dtc::CaseOutcome out = dtc::run_case(cfg, prep, cfg.sampling);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  if (out.status == dtc::RunStatus::IdentifiabilityFailed) {
    std::cerr << out.identifiability.render();
    return kExitIdentifiability;
  }
  if (out.status == dtc::RunStatus::Diverged) {
    std::cerr << "error: " << out.failure << '\n';
    return kExitDivergence;
  }
  print_solver(*out.solve);
  print_metrics(*out.metrics);
  if (!cfg.output.empty()) {
    std::filesystem::create_directories(cfg.output);
    dtc::StateDataset completed{*out.estimate, prep.dataset.labels, std::nullopt};
    std::ofstream csv(cfg.output / "completed.csv");
    dtc::write_dataset(csv, completed);
    write_text(cfg.output / "trace.csv", out.solve->trace.to_csv());
    write_text(cfg.output / "rounds.jsonl", out.solve->log.to_jsonl());
    std::cout << "wrote " << (cfg.output / "completed.csv").string() << '\n';
  }
  return 0;
}

int cmd_sweep(const Overrides& o, std::size_t max_rank, std::size_t iters, std::size_t area) {
  const dtc::ExperimentConfig cfg = o.load();
  const dtc::PreparedExperiment prep = dtc::prepare_experiment(cfg);
  dtc::MaskedTensor3 full = dtc::MaskedTensor3::fully_observed(prep.dataset.truth);
  if (area > 0) {
    if (area > prep.partition.num_areas()) throw dtc::ArgumentError("--area out of range");
    full = full.select_phases(prep.partition.phases(area - 1));
  }
  std::string csv = "rank,relative_error\n";
  for (const auto& pt : dtc::rank_sweep(full, max_rank, iters, cfg.solver.seed)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.6e\n", pt.rank, pt.relative_error);
    csv += buf;
  }
  std::cout << csv;
  if (!cfg.output.empty()) {
    std::filesystem::create_directories(cfg.output);
    write_text(cfg.output / "rank_sweep.csv", csv);
  }
  return 0;
}

int cmd_experiment(const Overrides& o) {
  const dtc::ExperimentConfig cfg = o.load();
  const dtc::ExperimentResult r = dtc::run_experiment(cfg);
  for (const auto& w : r.main.warnings) std::cerr << "warning: " << w << '\n';
  if (r.main.status == dtc::RunStatus::IdentifiabilityFailed) std::cerr << r.main.identifiability.render();
  if (r.main.status == dtc::RunStatus::Diverged) std::cerr << "error: " << r.main.failure << '\n';
  if (r.main.solve) print_solver(*r.main.solve);
  if (r.main.metrics) print_metrics(*r.main.metrics);
  if (!r.cases.empty()) std::cout << dtc::curves_csv(r.cases);
  if (!cfg.output.empty()) std::cout << "report: " << (cfg.output / "report.json").string() << '\n';
  return r.exit_code;
}

int cmd_audit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dtc::ParseError("cannot open '" + path + "'", 0);
  const dtc::AuditReport report = dtc::audit_communication(dtc::CommunicationLog::from_jsonl(in));
  std::cout << report.rounds << " rounds, " << report.messages << " messages, "
            << report.expected_per_round << " expected per round\n";
  for (const auto& v : report.violations) std::cout << "violation: " << v << '\n';
  std::cout << (report.ok() ? "ok\n" : "FAILED\n");
  return report.ok() ? 0 : 1;
}

int cmd_generate(const std::string& kind, std::size_t phases, std::size_t measurements,
                 std::size_t times, std::size_t rank, std::uint64_t seed, const std::string& out) {
  const dtc::StateDataset d =
      kind == "power" ? dtc::synthesize_power_like(phases, times, rank, seed)
                      : dtc::synthesize_lowrank({phases, measurements, times}, rank, seed);
  std::ofstream file(out);
  if (!file) throw dtc::ArgumentError("cannot write '" + out + "'");
  dtc::write_dataset(file, d);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed low-rank tensor completion"};
  app.require_subcommand(1);

  Overrides check_o, solve_o, sweep_o, exp_o;
  auto* check = app.add_subcommand("check", "Identifiability check of the configured sampling");
  check_o.add_to(check);
  auto* solve = app.add_subcommand("solve", "Complete the tensor with the distributed solver");
  solve_o.add_to(solve);
  auto* sweep = app.add_subcommand("sweep", "Rank sweep on the fully observed dataset");
  sweep_o.add_to(sweep);
  std::size_t max_rank = 10, sweep_iters = 500, sweep_area = 0;
  sweep->add_option("--max-rank", max_rank, "Largest rank")->check(CLI::PositiveNumber);
  sweep->add_option("--iters", sweep_iters, "ALS sweeps per rank")->check(CLI::PositiveNumber);
  sweep->add_option("--area", sweep_area, "Restrict to one area's phases (1-based)");
  auto* experiment = app.add_subcommand("experiment", "Full pipeline with report files");
  exp_o.add_to(experiment);
  auto* audit = app.add_subcommand("audit", "Check a rounds.jsonl communication log");
  std::string log_path;
  audit->add_option("log", log_path, "rounds.jsonl file")->required();
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  std::string gen_kind = "lowrank", gen_out;
  std::size_t gen_phases = 60, gen_meas = 5, gen_times = 72, gen_rank = 4;
  std::uint64_t gen_seed = 0;
  generate->add_option("--kind", gen_kind, "lowrank or power")->check(CLI::IsMember({"lowrank", "power"}));
  generate->add_option("--phases", gen_phases, "Number of phases");
  generate->add_option("--measurements", gen_meas, "Measurement types (lowrank only)");
  generate->add_option("--times", gen_times, "Number of time steps");
  generate->add_option("--rank", gen_rank, "Generating rank");
  generate->add_option("--seed", gen_seed, "Seed");
  generate->add_option("-o,--output", gen_out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return cmd_check(check_o);
    if (*solve) return cmd_solve(solve_o);
    if (*sweep) return cmd_sweep(sweep_o, max_rank, sweep_iters, sweep_area);
    if (*experiment) return cmd_experiment(exp_o);
    if (*audit) return cmd_audit(log_path);
    if (*generate) {
      return cmd_generate(gen_kind, gen_phases, gen_meas, gen_times, gen_rank, gen_seed, gen_out);
    }
  } catch (const dtc::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const dtc::ParseError& e) {
    std::cerr << "error: " << e.what();
    if (e.line() > 0) std::cerr << " (line " << e.line() << ')';
    std::cerr << '\n';
    return kExitInput;
  } catch (const dtc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
