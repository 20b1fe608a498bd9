#include "dtc/admm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "parallel.hpp"

namespace dtc {

void AdmmConfig::validate() const {
  if (rank == 0) throw ArgumentError("rank must be positive");
  if (!(penalty_mu > 0.0)) throw ArgumentError("penalty_mu must be positive");
  if (!(penalty_lambda > 0.0)) throw ArgumentError("penalty_lambda must be positive");
  if (!(kkt_tol > 0.0)) throw ArgumentError("kkt_tol must be positive");
  if (!(ridge_eps >= 0.0)) throw ArgumentError("ridge_eps must be nonnegative");
  if (init_iters == 0) throw ArgumentError("init_iters must be positive");
  if (init_restarts == 0) throw ArgumentError("init_restarts must be positive");
}

UpdateWorkspace::UpdateWorkspace(const MaskedTensor3& t) : dims_(t.dims()) {
  const Dims3& d = dims_;
  mode1_.resize(d.I);
  mode2_.resize(d.J);
  mode3_.resize(d.K);
  for (std::size_t i = 0; i < d.I; ++i) {
    for (std::size_t j = 0; j < d.J; ++j) {
      for (std::size_t k = 0; k < d.K; ++k) {
        if (!t.observed(i, j, k)) continue;
        const double x = t.data()(i, j, k);
        const auto ui = static_cast<std::uint32_t>(i);
        const auto uj = static_cast<std::uint32_t>(j);
        const auto uk = static_cast<std::uint32_t>(k);
        mode1_[i].push_back({uj, uk, x});
        mode2_[j].push_back({ui, uk, x});
        mode3_[k].push_back({ui, uj, x});
        ++observed_;
      }
    }
  }
}

const std::vector<std::vector<UpdateWorkspace::Entry>>& UpdateWorkspace::rows(int mode) const {
  switch (mode) {
    case 1: return mode1_;
    case 2: return mode2_;
    case 3: return mode3_;
    default: throw ArgumentError("mode must be 1, 2 or 3");
  }
}

AdmmAreaState make_area_state(FactorTriple f, const IndexSet& neighbors) {
  AdmmAreaState s{std::move(f.A), std::move(f.B), std::move(f.C), {}, {}};
  for (std::size_t n : neighbors) {
    s.gamma.emplace(n, Matrix::Zero(s.B.rows(), s.B.cols()));
    s.lambda.emplace(n, Matrix::Zero(s.C.rows(), s.C.cols()));
  }
  return s;
}

namespace {

using Entries = std::vector<UpdateWorkspace::Entry>;

// G = sum v v^T (lower triangle only), h = sum x v, with v = P(p,:) .* Q(q,:).
void accumulate_row(const Entries& entries, const Matrix& P, const Matrix& Q, Matrix& G,
                    Vector& h, Vector& v) {
  G.setZero();
  h.setZero();
  for (const auto& e : entries) {
    v = P.row(e.p).cwiseProduct(Q.row(e.q)).transpose();
    G.selfadjointView<Eigen::Lower>().rankUpdate(v);
    h.noalias() += e.x * v;
  }
}

const char* row_name(int mode) {
  switch (mode) {
    case 1: return "phase";
    case 2: return "measurement";
    default: return "time";
  }
}

// Solves (G_r + shift I) x_r = h_r + pull_r for every row r of one mode.
// Rows without observations are copied from `keep` when it is given.
Matrix solve_mode(const UpdateWorkspace& ws, int mode, const Matrix& P, const Matrix& Q,
                  double shift, const Matrix* pull, const Matrix* keep) {
  const auto& rows = ws.rows(mode);
  const Eigen::Index F = P.cols();
  Matrix out(static_cast<Eigen::Index>(rows.size()), F);
  Matrix G(F, F);
  Vector h(F), v(F);
  Eigen::LLT<Matrix, Eigen::Lower> llt(F);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    if (keep && rows[r].empty()) {
      out.row(ri) = keep->row(ri);
      continue;
    }
    accumulate_row(rows[r], P, Q, G, h, v);
    if (pull) h += pull->row(ri).transpose();
    G.diagonal().array() += shift;
    llt.compute(G);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
      throw SingularSystemError(std::string("singular normal matrix for ") + row_name(mode) +
                                    " row " + std::to_string(r) +
                                    " (too few observations; set ridge_eps > 0)",
                                r);
    }
    out.row(ri) = llt.solve(h).transpose();
  }
  return out;
}

// mu * sum_n ((X + X_n)/2 - dual_n)
Matrix consensus_pull(const Matrix& own, const NeighborMatrices& duals,
                      const NeighborMatrices& neighbors, double weight, const char* what) {
  Matrix pull = Matrix::Zero(own.rows(), own.cols());
  for (const auto& [n, dual] : duals) {
    const auto it = neighbors.find(n);
    if (it == neighbors.end()) {
      throw ArgumentError(std::string("missing ") + what + " copy of neighbor " + std::to_string(n));
    }
    if (it->second.rows() != own.rows() || it->second.cols() != own.cols()) {
      throw DimensionError(std::string("neighbor ") + what + " copy has wrong shape");
    }
    pull += 0.5 * (own + it->second) - dual;
  }
  return weight * pull;
}

}  // namespace

Matrix update_a(const UpdateWorkspace& ws, const AdmmAreaState& s, const AdmmConfig& cfg) {
  return solve_mode(ws, 1, s.B, s.C, cfg.ridge_eps, nullptr, nullptr);
}

Matrix update_b(const UpdateWorkspace& ws, const AdmmAreaState& s,
                const NeighborMatrices& neighbor_B, const AdmmConfig& cfg) {
  const Matrix pull = consensus_pull(s.B, s.gamma, neighbor_B, cfg.penalty_mu, "B");
  const double shift = cfg.ridge_eps + cfg.penalty_mu * static_cast<double>(s.gamma.size());
  return solve_mode(ws, 2, s.A, s.C, shift, &pull, nullptr);
}

Matrix update_c(const UpdateWorkspace& ws, const AdmmAreaState& s,
                const NeighborMatrices& neighbor_C, const AdmmConfig& cfg) {
  const Matrix pull = consensus_pull(s.C, s.lambda, neighbor_C, cfg.penalty_lambda, "C");
  const double shift = cfg.ridge_eps + cfg.penalty_lambda * static_cast<double>(s.lambda.size());
  return solve_mode(ws, 3, s.A, s.B, shift, &pull, nullptr);
}

double update_duals(AdmmAreaState& s, const NeighborMatrices& neighbor_B,
                    const NeighborMatrices& neighbor_C) {
  double sq = 0.0;
  for (auto& [n, dual] : s.gamma) {
    const Matrix delta = 0.5 * (s.B - neighbor_B.at(n));
    dual += delta;
    sq += delta.squaredNorm();
  }
  for (auto& [n, dual] : s.lambda) {
    const Matrix delta = 0.5 * (s.C - neighbor_C.at(n));
    dual += delta;
    sq += delta.squaredNorm();
  }
  return sq;
}

void primal_step(const UpdateWorkspace& ws, AdmmAreaState& s, const NeighborMatrices& neighbor_B,
                 const NeighborMatrices& neighbor_C, const AdmmConfig& cfg) {
  s.A = update_a(ws, s, cfg);
  Matrix B = update_b(ws, s, neighbor_B, cfg);
  // update_c pulls toward (C_i^k + C_j^k)/2 and reads s.B as B_i^{k+1}.
  s.B = std::move(B);
  s.C = update_c(ws, s, neighbor_C, cfg);
}

namespace {

// || G x + shift x - h - pull || summed over the rows of one mode.
double stationarity(const UpdateWorkspace& ws, int mode, const Matrix& P, const Matrix& Q,
                    const Matrix& X, double shift, const Matrix* pull) {
  const auto& rows = ws.rows(mode);
  const Eigen::Index F = P.cols();
  Matrix G(F, F);
  Vector h(F), v(F), r(F);
  double sq = 0.0;
  for (std::size_t row = 0; row < rows.size(); ++row) {
    const auto ri = static_cast<Eigen::Index>(row);
    accumulate_row(rows[row], P, Q, G, h, v);
    const Vector x = X.row(ri).transpose();
    r.noalias() = G.selfadjointView<Eigen::Lower>() * x;
    r += shift * x - h;
    if (pull) r -= pull->row(ri).transpose();
    sq += r.squaredNorm();
  }
  return std::sqrt(sq);
}

}  // namespace

AreaResiduals kkt_residuals(const UpdateWorkspace& ws, const AdmmAreaState& s,
                            const NeighborMatrices& neighbor_B, const NeighborMatrices& neighbor_C,
                            const AdmmConfig& cfg) {
  AreaResiduals r;
  r.stationarity_a = stationarity(ws, 1, s.B, s.C, s.A, 0.0, nullptr);
  const Matrix pull_b = consensus_pull(s.B, s.gamma, neighbor_B, cfg.penalty_mu, "B");
  r.stationarity_b = stationarity(ws, 2, s.A, s.C, s.B,
                                  cfg.penalty_mu * static_cast<double>(s.gamma.size()), &pull_b);
  const Matrix pull_c = consensus_pull(s.C, s.lambda, neighbor_C, cfg.penalty_lambda, "C");
  r.stationarity_c = stationarity(ws, 3, s.A, s.B, s.C,
                                  cfg.penalty_lambda * static_cast<double>(s.lambda.size()),
                                  &pull_c);
  for (const auto& [n, _] : s.gamma) r.consensus_B = std::max(r.consensus_B, (s.B - neighbor_B.at(n)).norm());
  for (const auto& [n, _] : s.lambda) r.consensus_C = std::max(r.consensus_C, (s.C - neighbor_C.at(n)).norm());
  return r;
}

double local_objective(const UpdateWorkspace& ws, const Matrix& A, const Matrix& B,
                       const Matrix& C) {
  const auto& rows = ws.rows(1);
  double sq = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto ri = static_cast<Eigen::Index>(i);
    for (const auto& e : rows[i]) {
      const double m = (A.row(ri).cwiseProduct(B.row(e.p))).dot(C.row(e.q));
      sq += (e.x - m) * (e.x - m);
    }
  }
  return 0.5 * sq;
}

std::string ConvergenceTrace::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "iter,objective,max_consensus_B,max_consensus_C,max_stationarity,dual_delta\n";
  for (const auto& r : rows) {
    os << r.iter << ',' << r.objective << ',' << r.max_consensus_B << ',' << r.max_consensus_C
       << ',' << r.max_stationarity << ',' << r.dual_delta << '\n';
  }
  return os.str();
}

std::uint64_t area_seed(std::uint64_t seed, std::size_t area) {
  // splitmix64 finalizer over (seed, area)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(area) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix M(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) M(r, c) = normal(rng);
  return M;
}

void als_sweeps(const UpdateWorkspace& ws, FactorTriple& f, std::size_t iters, double ridge,
                bool keep_empty, std::vector<double>* objective, bool line_search = false) {
  AdmmAreaState s{f.A, f.B, f.C, {}, {}};
  double current = line_search ? local_objective(ws, s.A, s.B, s.C) : 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const Matrix A0 = line_search ? s.A : Matrix(), B0 = line_search ? s.B : Matrix(),
                 C0 = line_search ? s.C : Matrix();
    s.A = solve_mode(ws, 1, s.B, s.C, ridge, nullptr, keep_empty ? &s.A : nullptr);
    s.B = solve_mode(ws, 2, s.A, s.C, ridge, nullptr, keep_empty ? &s.B : nullptr);
    s.C = solve_mode(ws, 3, s.A, s.B, ridge, nullptr, keep_empty ? &s.C : nullptr);
    if (line_search) {
      current = local_objective(ws, s.A, s.B, s.C);
      // Extrapolate along the sweep direction and keep the step if it helps.
      const double step = std::cbrt(static_cast<double>(it + 1));
      Matrix A = s.A + step * (s.A - A0), B = s.B + step * (s.B - B0), C = s.C + step * (s.C - C0);
      const double trial = local_objective(ws, A, B, C);
      if (trial < current) {
        s.A = std::move(A);
        s.B = std::move(B);
        s.C = std::move(C);
        current = trial;
      }
    }
    if (objective) objective->push_back(line_search ? current : local_objective(ws, s.A, s.B, s.C));
  }
  f.A = std::move(s.A);
  f.B = std::move(s.B);
  f.C = std::move(s.C);
}

FactorTriple random_factors(const Dims3& d, std::size_t rank, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto F = static_cast<Eigen::Index>(rank);
  Matrix A = gaussian(static_cast<Eigen::Index>(d.I), F, rng);
  Matrix B = gaussian(static_cast<Eigen::Index>(d.J), F, rng);
  Matrix C = gaussian(static_cast<Eigen::Index>(d.K), F, rng);
  return FactorTriple(std::move(A), std::move(B), std::move(C));
}

// Rows without observations and columns beyond the unfolding's rank keep
// random draws.
FactorTriple singular_vector_factors(const MaskedTensor3& t, const UpdateWorkspace& ws,
                                     std::size_t rank, std::uint64_t seed) {
  const Tensor3 filled = t.masked_data();
  FactorTriple f = random_factors(t.dims(), rank, seed);
  Matrix* out[3] = {&f.A, &f.B, &f.C};
  for (int mode = 1; mode <= 3; ++mode) {
    Eigen::BDCSVD<Matrix> svd(unfold(filled, mode), Eigen::ComputeThinU);
    svd.setThreshold(1e-10);
    const Eigen::Index k = std::min<Eigen::Index>(out[mode - 1]->cols(), svd.rank());
    const auto& rows = ws.rows(mode);
    for (Eigen::Index r = 0; r < out[mode - 1]->rows(); ++r) {
      if (!rows[static_cast<std::size_t>(r)].empty())
        out[mode - 1]->row(r).head(k) = svd.matrixU().row(r).head(k);
    }
  }
  return f;
}

}  // namespace

InitResult init_local_cpd(const MaskedTensor3& t, std::size_t rank, std::size_t iters,
                          std::uint64_t seed, double ridge_eps, std::size_t restarts,
                          bool svd_start) {
  if (rank == 0) throw ArgumentError("rank must be positive");
  if (restarts == 0) throw ArgumentError("restarts must be positive");
  const Dims3& d = t.dims();
  if (d.size() == 0) throw ArgumentError("area sub-tensor is empty");
  InitResult out;
  const UpdateWorkspace ws(t);
  for (int mode = 1; mode <= 3; ++mode) {
    const auto& rows = ws.rows(mode);
    IndexSet empty;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (rows[r].empty()) empty.push_back(r);
    if (empty.empty()) continue;
    std::string list;
    for (std::size_t e = 0; e < std::min<std::size_t>(empty.size(), 8); ++e)
      list += (e ? "," : "") + std::to_string(empty[e] + 1);
    if (empty.size() > 8) list += ",...";
    out.warnings.push_back("degenerate initialization: " + std::to_string(empty.size()) + " " +
                           row_name(mode) + " row(s) without observations keep their starting values (" +
                           list + ")");
  }
  double best = std::numeric_limits<double>::infinity();
  std::optional<SingularSystemError> failure;
  auto consider = [&](FactorTriple f) {
    try {
      als_sweeps(ws, f, iters, ridge_eps, true, nullptr, true);
    } catch (const SingularSystemError& e) {
      failure = e;
      return;
    }
    const double obj = local_objective(ws, f.A, f.B, f.C);
    if (obj < best || out.factors.rank() == 0) {
      best = obj;
      out.factors = std::move(f);
    }
  };
  for (std::size_t r = 0; r < restarts; ++r)
    consider(random_factors(d, rank, r == 0 ? seed : area_seed(seed, r)));
  if (svd_start) consider(singular_vector_factors(t, ws, rank, seed));
  if (out.factors.rank() == 0) throw *failure;
  return out;
}

std::vector<AreaProblem> split_areas(const MaskedTensor3& t, const Partition& p) {
  if (p.num_phases() != t.dims().I) {
    throw ArgumentError("partition covers " + std::to_string(p.num_phases()) +
                        " phases but tensor has " + std::to_string(t.dims().I));
  }
  std::vector<AreaProblem> out;
  out.reserve(p.num_areas());
  for (std::size_t a = 0; a < p.num_areas(); ++a) {
    AreaProblem ap;
    ap.area = a;
    ap.phases = p.phases(a);
    ap.neighbors = p.neighbors(a);
    ap.local = t.select_phases(ap.phases);
    ap.workspace = UpdateWorkspace(ap.local);
    out.push_back(std::move(ap));
  }
  return out;
}

ObservedRows observed_rows(const UpdateWorkspace& ws) {
  ObservedRows out;
  const auto& m = ws.rows(2);
  const auto& t = ws.rows(3);
  for (std::size_t j = 0; j < m.size(); ++j)
    if (!m[j].empty()) out.measurements.push_back(j);
  for (std::size_t k = 0; k < t.size(); ++k)
    if (!t[k].empty()) out.times.push_back(k);
  return out;
}

AlignmentTree alignment_tree(const Partition& p) {
  const std::size_t n = p.num_areas();
  AlignmentTree tree;
  tree.parent.assign(n, n);
  tree.depth.assign(n, 0);
  for (std::size_t root = 0; root < n; ++root) {
    if (tree.parent[root] != n) continue;
    tree.parent[root] = root;
    std::queue<std::size_t> q;
    q.push(root);
    while (!q.empty()) {
      const std::size_t a = q.front();
      q.pop();
      for (std::size_t b : p.neighbors(a)) {
        if (tree.parent[b] != n) continue;
        tree.parent[b] = a;
        tree.depth[b] = tree.depth[a] + 1;
        tree.max_depth = std::max(tree.max_depth, tree.depth[b]);
        q.push(b);
      }
    }
  }
  return tree;
}

namespace {

IndexSet common(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Matrix take_rows(const Matrix& M, const IndexSet& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = M.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

double abs_cosine(const Vector& x, const Vector& y) {
  const double den = x.norm() * y.norm();
  return den > 0.0 ? std::abs(x.dot(y)) / den : 0.0;
}

double ls_scale(const Vector& target, const Vector& source) {
  const double den = source.squaredNorm();
  const double s = den > 0.0 ? target.dot(source) / den : 1.0;
  return (s != 0.0 && std::isfinite(s)) ? s : 1.0;
}

}  // namespace

bool align_to_neighbor(AdmmAreaState& s, const ObservedRows& own, const Matrix& neighbor_B,
                       const Matrix& neighbor_C, const ObservedRows& neighbor_rows) {
  const IndexSet cm = common(own.measurements, neighbor_rows.measurements);
  const IndexSet ct = common(own.times, neighbor_rows.times);
  if (cm.empty() || ct.empty()) return false;
  const Matrix rb = take_rows(neighbor_B, cm), ob = take_rows(s.B, cm);
  const Matrix rc = take_rows(neighbor_C, ct), oc = take_rows(s.C, ct);
  const Eigen::Index F = s.B.cols();

  Matrix sim(F, F);
  for (Eigen::Index f = 0; f < F; ++f)
    for (Eigen::Index g = 0; g < F; ++g)
      sim(f, g) = abs_cosine(rb.col(f), ob.col(g)) * abs_cosine(rc.col(f), oc.col(g));

  std::vector<Eigen::Index> perm(F, -1);
  std::vector<bool> used_f(F, false), used_g(F, false);
  for (Eigen::Index step = 0; step < F; ++step) {
    double best = -1.0;
    Eigen::Index bf = 0, bg = 0;
    for (Eigen::Index f = 0; f < F; ++f) {
      if (used_f[f]) continue;
      for (Eigen::Index g = 0; g < F; ++g) {
        if (!used_g[g] && sim(f, g) > best) {
          best = sim(f, g);
          bf = f;
          bg = g;
        }
      }
    }
    used_f[bf] = used_g[bg] = true;
    perm[bf] = bg;
  }

  Matrix A(s.A.rows(), F), B(s.B.rows(), F), C(s.C.rows(), F);
  for (Eigen::Index f = 0; f < F; ++f) {
    const Eigen::Index g = perm[f];
    const double sb = ls_scale(rb.col(f), ob.col(g));
    const double sc = ls_scale(rc.col(f), oc.col(g));
    A.col(f) = s.A.col(g) / (sb * sc);
    B.col(f) = s.B.col(g) * sb;
    C.col(f) = s.C.col(g) * sc;
  }
  s.A = std::move(A);
  s.B = std::move(B);
  s.C = std::move(C);
  return true;
}

bool refit_from_neighbor(const UpdateWorkspace& ws, AdmmAreaState& s, const Matrix& neighbor_B,
                         const Matrix& neighbor_C, const AdmmConfig& cfg) {
  FactorTriple f;
  try {
    Matrix A = solve_mode(ws, 1, neighbor_B, neighbor_C, cfg.ridge_eps, nullptr, &s.A);
    f = FactorTriple(std::move(A), neighbor_B, neighbor_C);
    als_sweeps(ws, f, cfg.init_iters, cfg.ridge_eps, true, nullptr, true);
  } catch (const SingularSystemError&) {
    return false;
  }
  if (!(local_objective(ws, f.A, f.B, f.C) < local_objective(ws, s.A, s.B, s.C))) return false;
  s.A = std::move(f.A);
  s.B = std::move(f.B);
  s.C = std::move(f.C);
  return true;
}

std::size_t graph_diameter(const Partition& p) {
  const std::size_t n = p.num_areas();
  std::size_t diameter = 0;
  for (std::size_t src = 0; src < n; ++src) {
    std::vector<std::size_t> dist(n, n);
    dist[src] = 0;
    std::queue<std::size_t> q;
    q.push(src);
    while (!q.empty()) {
      const std::size_t a = q.front();
      q.pop();
      diameter = std::max(diameter, dist[a]);
      for (std::size_t b : p.neighbors(a)) {
        if (dist[b] != n) continue;
        dist[b] = dist[a] + 1;
        q.push(b);
      }
    }
  }
  return diameter;
}

namespace {

std::size_t fill_axis(Matrix& M, IndexSet& known, const std::map<std::size_t, AreaSnapshot>& nb,
                      bool times) {
  std::vector<bool> have(static_cast<std::size_t>(M.rows()), false);
  for (std::size_t r : known) have[r] = true;
  std::size_t filled = 0;
  for (std::size_t r = 0; r < have.size(); ++r) {
    if (have[r]) continue;
    const auto ri = static_cast<Eigen::Index>(r);
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(M.cols());
    std::size_t count = 0;
    for (const auto& [n, snap] : nb) {
      const IndexSet& other = times ? snap.known.times : snap.known.measurements;
      if (!std::binary_search(other.begin(), other.end(), r)) continue;
      sum += (times ? snap.C : snap.B).row(ri);
      ++count;
    }
    if (count == 0) continue;
    M.row(ri) = sum / static_cast<double>(count);
    known.insert(std::upper_bound(known.begin(), known.end(), r), r);
    ++filled;
  }
  return filled;
}

}  // namespace

std::size_t fill_unknown_rows(AdmmAreaState& s, ObservedRows& known,
                              const std::map<std::size_t, AreaSnapshot>& neighbors) {
  return fill_axis(s.B, known.measurements, neighbors, false) +
         fill_axis(s.C, known.times, neighbors, true);
}

std::size_t init_rounds(const Partition& p, const AdmmConfig& cfg) {
  if (!cfg.align_init || p.num_areas() < 2) return 0;
  return alignment_tree(p).max_depth + graph_diameter(p);
}

namespace {

Partition partition_of(const std::vector<AreaProblem>& areas) {
  std::vector<IndexSet> phases(areas.size()), adjacency(areas.size());
  std::size_t total = 0;
  for (std::size_t a = 0; a < areas.size(); ++a) {
    phases[a] = areas[a].phases;
    adjacency[a] = areas[a].neighbors;
    total += phases[a].size();
  }
  return Partition(total, std::move(phases), std::move(adjacency));
}

}  // namespace

std::vector<AdmmAreaState> initialize_areas(const std::vector<AreaProblem>& areas,
                                            const AdmmConfig& cfg,
                                            std::vector<std::string>* warnings) {
  cfg.validate();
  const std::size_t n = areas.size();
  std::vector<InitResult> inits(n);
  detail::parallel_for(n, cfg.threads, [&](std::size_t a) {
    inits[a] = init_local_cpd(areas[a].local, cfg.rank, cfg.init_iters, area_seed(cfg.seed, a),
                              cfg.ridge_eps, cfg.init_restarts, cfg.init_svd);
  });
  std::vector<AdmmAreaState> states;
  states.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (warnings) {
      for (auto& w : inits[a].warnings) warnings->push_back("area " + std::to_string(a + 1) + ": " + w);
    }
    states.push_back(make_area_state(std::move(inits[a].factors), areas[a].neighbors));
  }
  const Partition p = partition_of(areas);
  if (init_rounds(p, cfg) == 0) return states;

  const AlignmentTree tree = alignment_tree(p);
  std::vector<ObservedRows> known(n);
  for (std::size_t a = 0; a < n; ++a) known[a] = observed_rows(areas[a].workspace);
  std::vector<AreaSnapshot> snaps(n);
  auto snapshot = [&] {
    for (std::size_t a = 0; a < n; ++a) snaps[a] = {states[a].B, states[a].C, known[a]};
  };
  std::vector<char> unaligned(n, 0);
  for (std::size_t level = 1; level <= tree.max_depth; ++level) {
    snapshot();
    detail::parallel_for(n, cfg.threads, [&](std::size_t a) {
      if (tree.depth[a] != level) return;
      const AreaSnapshot& up = snaps[tree.parent[a]];
      refit_from_neighbor(areas[a].workspace, states[a], up.B, up.C, cfg);
      unaligned[a] = !align_to_neighbor(states[a], known[a], up.B, up.C, up.known);
    });
    for (std::size_t a = 0; a < n; ++a) {
      if (unaligned[a] && warnings) {
        warnings->push_back("area " + std::to_string(a + 1) +
                            ": shares no observed measurement/time rows with area " +
                            std::to_string(tree.parent[a] + 1) + "; initial factors not aligned");
      }
      unaligned[a] = 0;
    }
  }
  const std::size_t fill = graph_diameter(p);
  for (std::size_t round = 0; round < fill; ++round) {
    snapshot();
    for (std::size_t a = 0; a < n; ++a) {
      std::map<std::size_t, AreaSnapshot> nb;
      for (std::size_t m : areas[a].neighbors) nb.emplace(m, snaps[m]);
      fill_unknown_rows(states[a], known[a], nb);
    }
  }
  return states;
}

FactorTriple assemble_global(const Partition& p, const std::vector<AdmmAreaState>& states) {
  if (states.size() != p.num_areas()) throw DimensionError("one state per area required");
  const Eigen::Index F = states.front().B.cols();
  Matrix A(static_cast<Eigen::Index>(p.num_phases()), F);
  Matrix B = Matrix::Zero(states.front().B.rows(), F);
  Matrix C = Matrix::Zero(states.front().C.rows(), F);
  for (std::size_t a = 0; a < states.size(); ++a) {
    const IndexSet& ph = p.phases(a);
    for (std::size_t r = 0; r < ph.size(); ++r)
      A.row(static_cast<Eigen::Index>(ph[r])) = states[a].A.row(static_cast<Eigen::Index>(r));
    B += states[a].B;
    C += states[a].C;
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  return FactorTriple(std::move(A), B * inv, C * inv);
}

TraceRow summarize_round(std::size_t iter, const std::vector<AreaProblem>& areas,
                         const std::vector<AdmmAreaState>& states,
                         std::vector<AreaResiduals> residuals, const std::vector<double>& dual_sq) {
  TraceRow row;
  row.iter = iter;
  double dual = 0.0;
  for (std::size_t a = 0; a < areas.size(); ++a) {
    const AdmmAreaState& s = states[a];
    const AreaResiduals& r = residuals[a];
    row.objective += local_objective(areas[a].workspace, s.A, s.B, s.C);
    row.max_consensus_B = std::max(row.max_consensus_B, r.consensus_B);
    row.max_consensus_C = std::max(row.max_consensus_C, r.consensus_C);
    row.max_stationarity =
        std::max({row.max_stationarity, r.stationarity_a, r.stationarity_b, r.stationarity_c});
    dual += dual_sq[a];
    for (const auto& [n, g] : s.gamma) {
      row.dual_antisymmetry = std::max(row.dual_antisymmetry, (g + states[n].gamma.at(a)).norm());
    }
    for (const auto& [n, l] : s.lambda) {
      row.dual_antisymmetry = std::max(row.dual_antisymmetry, (l + states[n].lambda.at(a)).norm());
    }
  }
  row.dual_delta = std::sqrt(dual);
  row.areas = std::move(residuals);
  return row;
}

bool residuals_below(const TraceRow& row, double tol) {
  return row.max_stationarity < tol && row.max_consensus_B < tol && row.max_consensus_C < tol;
}

void check_finite(const std::vector<AdmmAreaState>& states, std::size_t iter) {
  for (std::size_t a = 0; a < states.size(); ++a) {
    const auto& s = states[a];
    bool ok = s.A.allFinite() && s.B.allFinite() && s.C.allFinite();
    for (const auto& [n, g] : s.gamma) ok = ok && g.allFinite();
    for (const auto& [n, l] : s.lambda) ok = ok && l.allFinite();
    if (!ok) {
      throw DivergenceError("non-finite iterate in area " + std::to_string(a + 1) +
                                " at iteration " + std::to_string(iter),
                            iter);
    }
  }
}

namespace {

NeighborMatrices gather(const std::vector<Matrix>& copies, const IndexSet& neighbors) {
  NeighborMatrices out;
  for (std::size_t n : neighbors) out.emplace(n, copies[n]);
  return out;
}

}  // namespace

AdmmResult run_admm(const MaskedTensor3& t, const Partition& p, const AdmmConfig& cfg) {
  cfg.validate();
  const std::vector<AreaProblem> areas = split_areas(t, p);
  std::vector<std::string> warnings;
  auto states = initialize_areas(areas, cfg, &warnings);
  AdmmResult r = run_admm(t, p, cfg, std::move(states));
  r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
  return r;
}

AdmmResult run_admm(const MaskedTensor3& t, const Partition& p, const AdmmConfig& cfg,
                    std::vector<AdmmAreaState> initial) {
  cfg.validate();
  const std::vector<AreaProblem> areas = split_areas(t, p);
  const std::size_t n = areas.size();
  if (initial.size() != n) throw DimensionError("one initial state per area required");
  for (std::size_t a = 0; a < n; ++a) {
    const auto& s = initial[a];
    const auto F = static_cast<Eigen::Index>(cfg.rank);
    if (s.A.rows() != static_cast<Eigen::Index>(areas[a].phases.size()) ||
        s.B.rows() != static_cast<Eigen::Index>(t.dims().J) ||
        s.C.rows() != static_cast<Eigen::Index>(t.dims().K) || s.A.cols() != F ||
        s.B.cols() != F || s.C.cols() != F) {
      throw DimensionError("initial state of area " + std::to_string(a + 1) + " has wrong shape");
    }
    if (s.gamma.size() != areas[a].neighbors.size() ||
        s.lambda.size() != areas[a].neighbors.size()) {
      throw ArgumentError("dual maps of area " + std::to_string(a + 1) +
                          " must be keyed by its neighbors");
    }
  }

  AdmmResult result;
  result.states = std::move(initial);
  auto& states = result.states;
  std::vector<Matrix> copies_B(n), copies_C(n);
  for (std::size_t a = 0; a < n; ++a) {
    copies_B[a] = states[a].B;
    copies_C[a] = states[a].C;
  }

  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    detail::parallel_for(n, cfg.threads, [&](std::size_t a) {
      primal_step(areas[a].workspace, states[a], gather(copies_B, areas[a].neighbors),
                  gather(copies_C, areas[a].neighbors), cfg);
    });
    for (std::size_t a = 0; a < n; ++a) {
      copies_B[a] = states[a].B;
      copies_C[a] = states[a].C;
    }
    std::vector<double> dual_sq(n);
    std::vector<AreaResiduals> residuals(n);
    detail::parallel_for(n, cfg.threads, [&](std::size_t a) {
      const auto nb = gather(copies_B, areas[a].neighbors);
      const auto nc = gather(copies_C, areas[a].neighbors);
      dual_sq[a] = update_duals(states[a], nb, nc);
      residuals[a] = kkt_residuals(areas[a].workspace, states[a], nb, nc, cfg);
    });
    check_finite(states, iter);
    result.trace.rows.push_back(summarize_round(iter, areas, states, std::move(residuals), dual_sq));
    result.iterations = iter;
    if (residuals_below(result.trace.rows.back(), cfg.kkt_tol)) {
      result.converged = true;
      break;
    }
  }
  result.factors = assemble_global(p, states);
  return result;
}

AlsResult centralized_als(const MaskedTensor3& t, std::size_t rank, std::size_t iters,
                          std::uint64_t seed, double ridge_eps) {
  if (rank == 0) throw ArgumentError("rank must be positive");
  return centralized_als(t, random_factors(t.dims(), rank, seed), iters, ridge_eps);
}

AlsResult centralized_als(const MaskedTensor3& t, FactorTriple init, std::size_t iters,
                          double ridge_eps) {
  if (!(init.dims() == t.dims())) throw DimensionError("initial factors do not match tensor");
  const UpdateWorkspace ws(t);
  AlsResult r{std::move(init), {}};
  als_sweeps(ws, r.factors, iters, ridge_eps, false, &r.objective);
  return r;
}

std::vector<RankSweepPoint> rank_sweep(const MaskedTensor3& t, std::size_t max_rank,
                                       std::size_t iters, std::uint64_t seed) {
  if (t.observed_count() != t.dims().size()) throw ArgumentError("rank_sweep needs a fully observed tensor");
  if (max_rank == 0) throw ArgumentError("max_rank must be positive");
  const double norm_sq = frobenius_norm_sq(t.data());
  const double scale = norm_sq > 0.0 ? norm_sq : 1.0;
  auto error_of = [&](const FactorTriple& f) { return 2.0 * masked_objective(t, f) / scale; };

  std::vector<RankSweepPoint> out;
  std::optional<FactorTriple> prev;
  double prev_err = std::numeric_limits<double>::infinity();
  for (std::size_t F = 1; F <= max_rank; ++F) {
    FactorTriple best = centralized_als(t, F, iters, area_seed(seed, F)).factors;
    double best_err = error_of(best);
    if (prev) {
      const Dims3& d = t.dims();
      std::mt19937_64 rng(area_seed(seed + 1, F));
      const auto Fi = static_cast<Eigen::Index>(F);
      Matrix A(static_cast<Eigen::Index>(d.I), Fi), B(static_cast<Eigen::Index>(d.J), Fi),
          C(static_cast<Eigen::Index>(d.K), Fi);
      A << prev->A, Matrix::Zero(A.rows(), 1);
      B << prev->B, gaussian(B.rows(), 1, rng);
      C << prev->C, gaussian(C.rows(), 1, rng);
      FactorTriple warm = centralized_als(t, FactorTriple(A, B, C), iters).factors;
      const double warm_err = error_of(warm);
      if (warm_err < best_err) {
        best = std::move(warm);
        best_err = warm_err;
      }
      if (!(best_err <= prev_err)) {
        A << prev->A, Matrix::Zero(A.rows(), 1);
        B << prev->B, Matrix::Zero(B.rows(), 1);
        C << prev->C, Matrix::Zero(C.rows(), 1);
        best = FactorTriple(A, B, C);
        best_err = prev_err;
      }
    }
    out.push_back({F, best_err});
    prev = std::move(best);
    prev_err = best_err;
  }
  return out;
}

}  // namespace dtc
