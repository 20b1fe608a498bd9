#pragma once

// Experiment configuration and the end-to-end pipeline:
// dataset -> mask -> noise -> normalize -> identifiability check ->
// distributed solve -> denormalize -> metrics -> report files.
//
// Configs are JSON. Index lists in configs are 1-based and may be written
// as an array, a single number, "all", or a range "first:last" /
// "first:step:last" (inclusive).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtc/admm.hpp"
#include "dtc/dataset.hpp"
#include "dtc/identifiability.hpp"
#include "dtc/metrics.hpp"
#include "dtc/runtime.hpp"
#include "dtc/sampling.hpp"

namespace dtc {

struct IndexSpec {
  enum class Kind { All, List, Range };
  Kind kind = Kind::All;
  IndexSet list;            ///< 0-based, for List
  std::size_t first = 1;    ///< 1-based, for Range
  std::size_t step = 1;
  std::size_t last = 0;     ///< 1-based inclusive; 0 means the end of the axis

  /// 0-based indices within {0..axis_length-1}. Throws ArgumentError when a
  /// listed index is out of range.
  IndexSet resolve(std::size_t axis_length) const;
  /// Parses the config notation. Throws ArgumentError.
  static IndexSpec parse(const std::string& text);
  static IndexSpec of(IndexSet zero_based);
  std::string to_string() const;
};

struct DatasetSpec {
  enum class Kind { File, LowRank, PowerLike };
  Kind kind = Kind::LowRank;
  std::filesystem::path path;
  Dims3 dims{60, 5, 72};   ///< synthetic only; PowerLike ignores J
  std::size_t rank = 4;
  std::uint64_t seed = 0;
  double factor_scale = 1.0;
};

struct PartitionSpec {
  std::vector<std::size_t> sizes;    ///< contiguous areas, or
  std::vector<IndexSet> areas;       ///< explicit 0-based phase lists
  enum class Topology { Chain, Complete, Explicit };
  Topology topology = Topology::Chain;
  std::vector<IndexSet> adjacency;   ///< 0-based, for Explicit

  Partition build(std::size_t num_phases) const;
};

/// One sampling component. `phases` is over global phase ids; All means
/// every phase of the area. With draw > 0 that many phases are drawn from
/// the resolved candidates with draw_seed.
struct ComponentSpec {
  enum class Type { Horizontal, Frontal, Fiber };
  Type type = Type::Frontal;
  IndexSpec phases;
  std::size_t draw = 0;
  std::uint64_t draw_seed = 0;
  IndexSpec measurements;
  IndexSpec times;
};

using SamplingSpec = std::vector<std::vector<ComponentSpec>>;  ///< per area

SamplingScheme resolve_sampling(const SamplingSpec& spec, const Partition& p, const Dims3& dims);

struct CaseSpec {
  std::string name;
  SamplingSpec sampling;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  PartitionSpec partition;
  SamplingSpec sampling;
  std::vector<CaseSpec> cases;  ///< extra runs written to curves.csv
  double noise_rel_std = 0.0;
  std::uint64_t noise_seed = 0;
  /// Remove per-row temporal means before solving.
  bool normalize = false;
  bool strict = false;
  ScoreSet score = ScoreSet::Unobserved;
  AdmmConfig solver;
  std::filesystem::path output;  ///< empty: write nothing

  /// Throws ParseError / ArgumentError on invalid configs.
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Canonical JSON (sorted keys, output directory omitted).
  std::string to_json() const;
  /// FNV-1a 64 of to_json(), hex.
  std::string digest() const;
};

/// Dataset and partition shared by all cases of one experiment.
struct PreparedExperiment {
  StateDataset dataset;
  Partition partition;
};

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg);

enum class RunStatus { Ok, IdentifiabilityFailed, Diverged };

const char* to_string(RunStatus s);

struct CaseOutcome {
  std::string name;
  RunStatus status = RunStatus::Ok;
  SamplingScheme scheme;
  MaskedTensor3 observed;  ///< noisy observations, before normalization
  IdentifiabilityVerdict identifiability;
  std::optional<DistributedResult> solve;
  std::optional<Tensor3> estimate;  ///< denormalized
  std::optional<MetricsReport> metrics;
  std::string failure;
  std::vector<std::string> warnings;
};

CaseOutcome run_case(const ExperimentConfig& cfg, const PreparedExperiment& prep,
                     const SamplingSpec& sampling, const std::string& name = "main");

struct ExperimentResult {
  CaseOutcome main;
  std::vector<CaseOutcome> cases;
  std::string report_json;
  /// 0 ok, 2 identifiability failure under strict mode, 3 divergence.
  int exit_code = 0;
};

/// Runs the main sampling and every case. When cfg.output is set, writes
/// report.json, trace.csv, rounds.jsonl and (with cases) curves.csv there.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Plot-ready table, one row per case.
std::string curves_csv(const std::vector<CaseOutcome>& cases);

}  // namespace dtc
