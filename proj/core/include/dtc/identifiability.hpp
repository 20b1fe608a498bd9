#pragma once

// Sampling-based identifiability: per-area CPD uniqueness bounds, the sets
// of rows each area can identify, the mutual-identifiability graph between
// areas, and the ratio-based alignment that merges per-area factors.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dtc/sampling.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

enum class SubtensorKind { Slab, Fiber, FrontalOnly };

const char* to_string(SubtensorKind kind);

/// Sizes of the sampled sub-tensor of one area. Which fields matter depends
/// on `kind`:
///   Slab:        sampled_phases = |S^p|, measurements = J, sampled_times = K_n,
///                frontal_times = |S^t|
///   Fiber:       sampled_phases = |S^p|, measurements = |S^m|,
///                sampled_times = K_n, total_times = K
///   FrontalOnly: sampled_phases = I_n, measurements = J, frontal_times = |S^t|
struct AreaSamplingStats {
  SubtensorKind kind = SubtensorKind::Slab;
  std::size_t sampled_phases = 0;
  std::size_t measurements = 0;
  std::size_t sampled_times = 0;
  std::size_t frontal_times = 0;
  std::size_t total_times = 0;
};

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct UniquenessReport {
  bool unique = false;
  SubtensorKind kind = SubtensorKind::Slab;
  std::vector<BoundTerm> terms;  ///< terms of the min{...}
  double min_term = 0.0;
  double required = 0.0;         ///< log2(4F)
  /// 2^(floor(log2 d2) + floor(log2 d3) - 2) on the two smaller sampled dims.
  double generic_bound = 0.0;
  /// Same exponent minus one; the tighter reading of the generic bound.
  double generic_bound_conservative = 0.0;
  bool generic_bound_holds = false;
  std::string summary;
};

/// Scheme-specific sufficient condition for an essentially unique CPD of the
/// sampled sub-tensor. Throws ArgumentError for rank 0.
UniquenessReport local_uniqueness_check(const AreaSamplingStats& stats, std::size_t rank);

/// One stats record per sub-tensor kind present in the area's scheme.
std::vector<AreaSamplingStats> area_sampling_stats(const Partition& p, std::size_t area,
                                                   const AreaSampling& s, const Dims3& dims);

struct IdentifiableSets {
  IndexSet phases;        ///< P_n, subset of the area's phases
  IndexSet measurements;  ///< M_n
  IndexSet times;         ///< T_n
};

std::vector<IdentifiableSets> derive_identifiable_sets(const Partition& p,
                                                       const SamplingScheme& s,
                                                       const Dims3& dims);

std::size_t intersection_size(const IndexSet& a, const IndexSet& b);
IndexSet intersection(const IndexSet& a, const IndexSet& b);

/// (|M cap M'| >= 2 and |T cap T'| >= 1) or (|T cap T'| >= 2 and |M cap M'| >= 1).
bool mutual_identifiability(const IdentifiableSets& a, const IdentifiableSets& b);

struct IdentifiabilityGraph {
  std::size_t num_vertices = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  ///< m < n

  bool connected() const;
  /// Connected components, each sorted, ordered by smallest member.
  std::vector<IndexSet> components() const;
};

IdentifiabilityGraph build_identifiability_graph(const std::vector<IdentifiableSets>& sets);

struct IdentifiabilityVerdict {
  bool verdict = false;
  std::vector<bool> area_unique;
  std::vector<UniquenessReport> area_reports;  ///< best report per area
  bool local_uniqueness = false;
  bool phase_coverage = false;
  bool measurement_coverage = false;
  bool time_coverage = false;
  bool graph_connected = false;
  std::vector<IdentifiableSets> sets;
  IdentifiabilityGraph graph;
  std::vector<std::string> diagnostics;

  /// Multi-line human-readable report.
  std::string render() const;
};

/// Full sufficient condition: local uniqueness in every area, coverage of all
/// phase / measurement / time rows, and a connected identifiability graph.
IdentifiabilityVerdict check_identifiability(const Partition& p, const SamplingScheme& s,
                                             std::size_t rank, const Dims3& dims);

/// Factors recovered in one area. B and C span the full measurement and time
/// axes; only rows in the area's identifiable sets carry information.
struct FactorFragment {
  Matrix A;
  Matrix B;
  Matrix C;
};

/// Maps `other` onto `reference`: column f of the aligned fragment is column
/// permutation[f] of `other`, multiplied by scale_A/B/C[f].
struct FactorAlignment {
  std::vector<std::size_t> permutation;
  Vector scale_A;
  Vector scale_B;
  Vector scale_C;
};

struct AlignmentOptions {
  double rel_tol = 1e-6;
};

/// Resolves the permutation from element-wise ratios of the shared rows of
/// whichever factor has at least two shared rows, then fixes the B and C
/// scales from one shared row each and pushes the counter-scale into A.
/// Throws PreconditionError when the shared rows do not satisfy mutual
/// identifiability and AlignmentError when columns cannot be matched.
FactorAlignment align_factors(const FactorFragment& reference, const FactorFragment& other,
                              const IndexSet& common_measurements, const IndexSet& common_times,
                              const AlignmentOptions& options = {});

FactorFragment apply_alignment(const FactorFragment& f, const FactorAlignment& alignment);

/// Merges per-area fragments into global factors by aligning areas along a
/// spanning tree of the identifiability graph rooted at area 0. A rows are
/// stacked according to the partition; B and C rows come from the first
/// aligned area that identifies them.
FactorTriple merge_fragments(const Partition& p, const std::vector<FactorFragment>& fragments,
                             const std::vector<IdentifiableSets>& sets,
                             const AlignmentOptions& options = {});

}  // namespace dtc
