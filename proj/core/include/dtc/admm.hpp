#pragma once

// Consensus ADMM for multi-area CPD completion.
//
// Area i owns A_i (its phase rows) and local copies B_i, C_i of the shared
// measurement and time factors. Neighbors are pulled together through the
// eliminated auxiliaries (B_i + B_j) / 2 and scaled duals Gamma_ij, Lambda_ij.
// One round is: a-update, b-update, c-update in every area (all reading the
// neighbors' copies from the previous round), exchange, dual update.
//
// Every primal update is an exact least-squares solve. The design matrices
// diag(w) ((C kr B) kron I) are never formed: they decouple into one F x F
// normal system per row of the factor being updated.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtc/sampling.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

struct AdmmConfig {
  std::size_t rank = 1;
  double penalty_mu = 1.0;      ///< weight of the B consensus term
  double penalty_lambda = 1.0;  ///< weight of the C consensus term
  std::size_t max_iters = 500;
  double kkt_tol = 1e-6;
  double ridge_eps = 1e-8;      ///< added to every normal-matrix diagonal
  std::size_t init_iters = 300; ///< local ALS sweeps per area
  std::size_t init_restarts = 8; ///< random starts per area; the best local fit is kept
  /// Also start from the leading singular vectors of the zero-filled unfoldings.
  bool init_svd = true;
  std::uint64_t seed = 0;
  /// Refit and align every area's initial factors along a spanning tree
  /// rooted at area 0 and fill rows it never observes from its neighbors
  /// before the first round.
  bool align_init = true;
  /// Worker threads for per-area updates; results do not depend on it.
  std::size_t threads = 1;

  /// Throws ArgumentError on invalid values.
  void validate() const;
};

/// Observed entries of one tensor grouped by row of each mode unfolding.
/// For mode 1 the entry of row i stores (j, k); mode 2 row j stores (i, k);
/// mode 3 row k stores (i, j).
class UpdateWorkspace {
 public:
  struct Entry {
    std::uint32_t p;
    std::uint32_t q;
    double x;
  };

  UpdateWorkspace() = default;
  explicit UpdateWorkspace(const MaskedTensor3& t);

  const Dims3& dims() const noexcept { return dims_; }
  const std::vector<std::vector<Entry>>& rows(int mode) const;
  std::size_t observed() const noexcept { return observed_; }

 private:
  Dims3 dims_;
  std::size_t observed_ = 0;
  std::vector<std::vector<Entry>> mode1_, mode2_, mode3_;
};

using NeighborMatrices = std::map<std::size_t, Matrix>;

struct AdmmAreaState {
  Matrix A;
  Matrix B;
  Matrix C;
  NeighborMatrices gamma;   ///< scaled duals for B, keyed by neighbor
  NeighborMatrices lambda;  ///< scaled duals for C, keyed by neighbor
};

/// Zero duals for every neighbor.
AdmmAreaState make_area_state(FactorTriple f, const IndexSet& neighbors);

/// Least-squares A update for fixed B, C. Throws SingularSystemError naming
/// the phase row when a normal matrix is singular (only possible with
/// ridge_eps == 0).
Matrix update_a(const UpdateWorkspace& ws, const AdmmAreaState& s, const AdmmConfig& cfg);

/// B update with the mu-weighted pull toward (B_i + B_j)/2 - Gamma_ij, using
/// the current s.A and the B_i, C_i of the previous round.
Matrix update_b(const UpdateWorkspace& ws, const AdmmAreaState& s,
                const NeighborMatrices& neighbor_B, const AdmmConfig& cfg);

/// C update, symmetric to update_b with lambda and Lambda_ij.
Matrix update_c(const UpdateWorkspace& ws, const AdmmAreaState& s,
                const NeighborMatrices& neighbor_C, const AdmmConfig& cfg);

/// Gamma_ij += (B_i - B_j) / 2 and Lambda_ij += (C_i - C_j) / 2. Returns the
/// squared Frobenius norm of the change over all duals of the area.
double update_duals(AdmmAreaState& s, const NeighborMatrices& neighbor_B,
                    const NeighborMatrices& neighbor_C);

struct AreaResiduals {
  double stationarity_a = 0.0;  ///< || D^T (w*x - D a) ||
  double stationarity_b = 0.0;
  double stationarity_c = 0.0;
  double consensus_B = 0.0;     ///< max over neighbors of ||B_i - B_j||_F
  double consensus_C = 0.0;
};

/// KKT residuals of one area, with the auxiliaries taken as neighbor averages.
AreaResiduals kkt_residuals(const UpdateWorkspace& ws, const AdmmAreaState& s,
                            const NeighborMatrices& neighbor_B, const NeighborMatrices& neighbor_C,
                            const AdmmConfig& cfg);

/// (1/2) || W * (X - [[A, B, C]]) ||_F^2 over the workspace's entries.
double local_objective(const UpdateWorkspace& ws, const Matrix& A, const Matrix& B,
                       const Matrix& C);

struct TraceRow {
  std::size_t iter = 0;
  double objective = 0.0;
  double max_consensus_B = 0.0;
  double max_consensus_C = 0.0;
  double max_stationarity = 0.0;
  double dual_delta = 0.0;         ///< sqrt of summed squared dual changes
  double dual_antisymmetry = 0.0;  ///< max ||Gamma_ij + Gamma_ji||, ||Lambda_ij + Lambda_ji||
  std::vector<AreaResiduals> areas;
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;

  /// Header: iter,objective,max_consensus_B,max_consensus_C,max_stationarity,dual_delta
  std::string to_csv() const;
};

struct InitResult {
  FactorTriple factors;
  std::vector<std::string> warnings;
};

/// Masked ALS on one area's sub-tensor from a seeded N(0, 1) draw. Rows with
/// no observations keep their starting values and produce a warning. With
/// restarts > 1, or an extra start from the leading left singular vectors of
/// the zero-filled unfoldings, the fit with the smallest local objective is
/// returned.
InitResult init_local_cpd(const MaskedTensor3& t, std::size_t rank, std::size_t iters,
                          std::uint64_t seed, double ridge_eps = 1e-8,
                          std::size_t restarts = 1, bool svd_start = false);

/// Per-area seed derived from the run seed.
std::uint64_t area_seed(std::uint64_t seed, std::size_t area);

/// Area sub-tensors and their workspaces.
struct AreaProblem {
  std::size_t area = 0;
  IndexSet phases;
  IndexSet neighbors;
  MaskedTensor3 local;
  UpdateWorkspace workspace;
};

std::vector<AreaProblem> split_areas(const MaskedTensor3& t, const Partition& p);

/// Rows of B (measurements) and C (times) an area has at least one
/// observation in.
struct ObservedRows {
  IndexSet measurements;
  IndexSet times;
};

ObservedRows observed_rows(const UpdateWorkspace& ws);

/// Breadth-first spanning forest of the communication graph from area 0
/// (then the smallest unvisited area). parent[root] == root.
struct AlignmentTree {
  std::vector<std::size_t> parent;
  std::vector<std::size_t> depth;
  std::size_t max_depth = 0;
};

AlignmentTree alignment_tree(const Partition& p);

/// Permutes and rescales `s` so its B, C copies best match a neighbor's on
/// the rows both observe: columns are paired greedily by the product of the
/// absolute cosines of their B and C restrictions, then B and C columns are
/// least-squares scaled and A counter-scaled. Returns false (and leaves `s`
/// unchanged) when the areas share no measurement or no time row.
bool align_to_neighbor(AdmmAreaState& s, const ObservedRows& own, const Matrix& neighbor_B,
                       const Matrix& neighbor_C, const ObservedRows& neighbor_rows);

/// Runs the local ALS of initialization again from a neighbor's B and C (A
/// by least squares) and keeps the result when its local objective is lower
/// than that of `s`. Returns true when `s` was replaced.
bool refit_from_neighbor(const UpdateWorkspace& ws, AdmmAreaState& s, const Matrix& neighbor_B,
                         const Matrix& neighbor_C, const AdmmConfig& cfg);

/// Longest shortest path in any connected component of the communication
/// graph.
std::size_t graph_diameter(const Partition& p);

/// What an area shares with its neighbors during initialization.
struct AreaSnapshot {
  Matrix B;
  Matrix C;
  ObservedRows known;
};

/// Rows of B and C missing from `known` are replaced by the average of the
/// neighbors' rows that are known to them, and become known. Returns the
/// number of rows filled.
std::size_t fill_unknown_rows(AdmmAreaState& s, ObservedRows& known,
                              const std::map<std::size_t, AreaSnapshot>& neighbors);

/// Number of synchronous exchange rounds initialize_areas performs:
/// alignment_tree(p).max_depth rounds of alignment then graph_diameter(p)
/// rounds of row filling (zero when align_init is off).
std::size_t init_rounds(const Partition& p, const AdmmConfig& cfg);

/// Local CPD in every area with zero duals. With align_init, each area is
/// then refit from and aligned to its parent in the alignment tree, level by
/// level, and completed with neighbors' rows.
std::vector<AdmmAreaState> initialize_areas(const std::vector<AreaProblem>& areas,
                                            const AdmmConfig& cfg,
                                            std::vector<std::string>* warnings = nullptr);

/// Stacked A, and B, C averaged over the area copies.
FactorTriple assemble_global(const Partition& p, const std::vector<AdmmAreaState>& states);

struct AdmmResult {
  FactorTriple factors;
  ConvergenceTrace trace;
  std::vector<AdmmAreaState> states;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// a -> b -> c update of one area against the neighbors' previous-round
/// copies. Shared by the in-memory solver and the message-passing runtime.
void primal_step(const UpdateWorkspace& ws, AdmmAreaState& s, const NeighborMatrices& neighbor_B,
                 const NeighborMatrices& neighbor_C, const AdmmConfig& cfg);

/// Builds the trace row for a finished round from all area states and the
/// per-area residuals and dual changes.
TraceRow summarize_round(std::size_t iter, const std::vector<AreaProblem>& areas,
                         const std::vector<AdmmAreaState>& states,
                         std::vector<AreaResiduals> residuals, const std::vector<double>& dual_sq);

bool residuals_below(const TraceRow& row, double tol);

/// Throws DivergenceError if any factor or dual entry is non-finite.
void check_finite(const std::vector<AdmmAreaState>& states, std::size_t iter);

AdmmResult run_admm(const MaskedTensor3& t, const Partition& p, const AdmmConfig& cfg);

/// Same, starting from caller-provided area states (duals included).
AdmmResult run_admm(const MaskedTensor3& t, const Partition& p, const AdmmConfig& cfg,
                    std::vector<AdmmAreaState> initial);

struct AlsResult {
  FactorTriple factors;
  std::vector<double> objective;  ///< after each sweep
};

/// Masked ALS on the whole tensor; same row solves as update_a, cycling modes.
/// Throws ArgumentError for rank 0.
AlsResult centralized_als(const MaskedTensor3& t, std::size_t rank, std::size_t iters,
                          std::uint64_t seed, double ridge_eps = 1e-8);

AlsResult centralized_als(const MaskedTensor3& t, FactorTriple init, std::size_t iters,
                          double ridge_eps = 1e-8);

struct RankSweepPoint {
  std::size_t rank = 0;
  /// ||X - X_F||_F^2 / ||X||_F^2
  double relative_error = 0.0;
};

/// Best-of warm-started and cold-started ALS for F = 1..max_rank on a fully
/// observed tensor. A rank-F fit padded with a zero column is a valid
/// rank-(F+1) fit, so the curve is non-increasing.
std::vector<RankSweepPoint> rank_sweep(const MaskedTensor3& t, std::size_t max_rank,
                                       std::size_t iters, std::uint64_t seed);

}  // namespace dtc
