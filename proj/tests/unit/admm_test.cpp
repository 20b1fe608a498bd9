#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "dtc/admm.hpp"
#include "instances.hpp"

using namespace dtc;
using dtc::testing::random_mask;
using dtc::testing::random_matrix;
using dtc::testing::random_triple;

namespace {

// Literal vectorized normal equations. For mode n the design matrix is
// diag(w) ((Q kr P) kron I) with the unfolding convention of tensor.hpp.
struct Vectorized {
  Matrix D;
  Vector wx;
};

Vectorized design(const MaskedTensor3& t, int mode, const Matrix& P, const Matrix& Q) {
  const auto [X, W] = mode_unfold(t, mode);
  const Eigen::Index rows = X.rows();
  const Matrix kr = khatri_rao(Q, P);
  const Matrix full = kronecker(kr, Matrix::Identity(rows, rows));
  const Vector w = W.reshaped();
  Vectorized v;
  v.D = w.asDiagonal() * full;
  v.wx = w.cwiseProduct(X.reshaped());
  return v;
}

Matrix solve_vectorized(const Vectorized& v, double shift, const Vector& pull, Eigen::Index rows,
                        Eigen::Index F) {
  const Matrix N = v.D.transpose() * v.D + shift * Matrix::Identity(v.D.cols(), v.D.cols());
  const Vector x = N.ldlt().solve(v.D.transpose() * v.wx + pull);
  return x.reshaped(rows, F);
}

struct Instance {
  MaskedTensor3 t;
  UpdateWorkspace ws;
  AdmmAreaState s;
  NeighborMatrices nb_B, nb_C;
  AdmmConfig cfg;
};

Instance random_instance(std::uint64_t seed, double density = 0.6) {
  std::mt19937_64 rng(seed);
  const Dims3 d{4, 3, 5};
  Instance in;
  in.t = MaskedTensor3(reconstruct(random_triple(d, 2, rng)), random_mask(d, density, rng));
  in.ws = UpdateWorkspace(in.t);
  in.s = make_area_state(random_triple(d, 2, rng), {1, 4});
  for (std::size_t n : {1, 4}) {
    in.nb_B[n] = random_matrix(3, 2, rng);
    in.nb_C[n] = random_matrix(5, 2, rng);
    in.s.gamma[n] = random_matrix(3, 2, rng);
    in.s.lambda[n] = random_matrix(5, 2, rng);
  }
  in.cfg.rank = 2;
  in.cfg.penalty_mu = 0.7;
  in.cfg.penalty_lambda = 1.3;
  in.cfg.ridge_eps = 1e-3;
  return in;
}

Vector pull_of(const Matrix& own, const NeighborMatrices& duals, const NeighborMatrices& nb,
               double weight) {
  Matrix p = Matrix::Zero(own.rows(), own.cols());
  for (const auto& [n, dual] : duals) p += 0.5 * (own + nb.at(n)) - dual;
  return weight * p.reshaped();
}

double max_abs(const Matrix& X) { return X.cwiseAbs().maxCoeff(); }

double block_b(const Instance& in, const Matrix& A, const Matrix& B, const Matrix& C,
               const Matrix& Bk) {
  double v = local_objective(in.ws, A, B, C) + 0.5 * in.cfg.ridge_eps * B.squaredNorm();
  for (const auto& [n, g] : in.s.gamma)
    v += 0.5 * in.cfg.penalty_mu * (B - (0.5 * (Bk + in.nb_B.at(n)) - g)).squaredNorm();
  return v;
}

}  // namespace

TEST_CASE("AdmmConfig validation") {
  AdmmConfig c;
  CHECK_NOTHROW(c.validate());
  c.penalty_mu = 0.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.penalty_lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.kkt_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.rank = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.ridge_eps = -1e-9;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("UpdateWorkspace groups observed entries by row") {
  const Instance in = random_instance(1);
  const Dims3 d = in.t.dims();
  std::size_t total[3] = {0, 0, 0};
  for (int mode = 1; mode <= 3; ++mode)
    for (const auto& row : in.ws.rows(mode)) total[mode - 1] += row.size();
  CHECK(total[0] == in.t.observed_count());
  CHECK(total[1] == in.t.observed_count());
  CHECK(total[2] == in.t.observed_count());
  CHECK(in.ws.rows(2).size() == d.J);
  for (const auto& e : in.ws.rows(3)[2]) CHECK(in.t.data()(e.p, e.q, 2) == e.x);
  CHECK_THROWS_AS(in.ws.rows(0), ArgumentError);
}

TEST_CASE("update_a matches the vectorized D-matrix solve") {
  for (std::uint64_t seed : {2, 3, 4}) {
    const Instance in = random_instance(seed);
    const Matrix A = update_a(in.ws, in.s, in.cfg);
    const Matrix oracle = solve_vectorized(design(in.t, 1, in.s.B, in.s.C), in.cfg.ridge_eps,
                                           Vector::Zero(8), 4, 2);
    CHECK(max_abs(A - oracle) <= 1e-9);
  }
}

TEST_CASE("update_b matches the vectorized E-matrix solve") {
  for (std::uint64_t seed : {5, 6, 7}) {
    const Instance in = random_instance(seed);
    const Matrix B = update_b(in.ws, in.s, in.nb_B, in.cfg);
    const double shift = in.cfg.ridge_eps + in.cfg.penalty_mu * 2.0;
    const Matrix oracle = solve_vectorized(design(in.t, 2, in.s.A, in.s.C), shift,
                                           pull_of(in.s.B, in.s.gamma, in.nb_B, in.cfg.penalty_mu),
                                           3, 2);
    CHECK(max_abs(B - oracle) <= 1e-9);
  }
}

TEST_CASE("update_c matches the vectorized G-matrix solve") {
  for (std::uint64_t seed : {8, 9, 10}) {
    const Instance in = random_instance(seed);
    const Matrix C = update_c(in.ws, in.s, in.nb_C, in.cfg);
    const double shift = in.cfg.ridge_eps + in.cfg.penalty_lambda * 2.0;
    const Matrix oracle =
        solve_vectorized(design(in.t, 3, in.s.A, in.s.B), shift,
                         pull_of(in.s.C, in.s.lambda, in.nb_C, in.cfg.penalty_lambda), 5, 2);
    CHECK(max_abs(C - oracle) <= 1e-9);
  }
}

TEST_CASE("update_a with exact B and C on full data returns A") {
  std::mt19937_64 rng(11);
  const FactorTriple f = random_triple({6, 4, 5}, 3, rng);
  const MaskedTensor3 t = MaskedTensor3::fully_observed(reconstruct(f));
  AdmmConfig cfg;
  cfg.rank = 3;
  cfg.ridge_eps = 0.0;
  AdmmAreaState s = make_area_state(FactorTriple(Matrix::Zero(6, 3), f.B, f.C), {});
  CHECK(max_abs(update_a(UpdateWorkspace(t), s, cfg) - f.A) <= 1e-10);
}

TEST_CASE("update_a decouples rows and names a singular one") {
  std::mt19937_64 rng(12);
  const Dims3 d{3, 3, 4};
  const FactorTriple f = random_triple(d, 2, rng);
  Mask3 m(d, 0);
  for (std::size_t j = 0; j < d.J; ++j)
    for (std::size_t k = 0; k < d.K; ++k) m(0, j, k) = 1;
  const MaskedTensor3 t(reconstruct(f), m);
  const UpdateWorkspace ws(t);
  AdmmConfig cfg;
  cfg.rank = 2;
  AdmmAreaState s = make_area_state(FactorTriple(Matrix::Zero(3, 2), f.B, f.C), {});
  const Matrix A = update_a(ws, s, cfg);
  CHECK(max_abs(A.row(0) - f.A.row(0)) <= 1e-6);
  CHECK(max_abs(A.bottomRows(2)) == 0.0);
  cfg.ridge_eps = 0.0;
  try {
    update_a(ws, s, cfg);
    FAIL("expected a singular system");
  } catch (const SingularSystemError& e) {
    CHECK(e.row() == 1);
    CHECK(std::string(e.what()).find("phase row 1") != std::string::npos);
  }
}

TEST_CASE("update_b without observations is the consensus average") {
  std::mt19937_64 rng(13);
  const Dims3 d{2, 3, 4};
  const MaskedTensor3 t(reconstruct(random_triple(d, 2, rng)), Mask3(d, 0));
  AdmmConfig cfg;
  cfg.rank = 2;
  cfg.ridge_eps = 0.0;
  AdmmAreaState s = make_area_state(random_triple(d, 2, rng), {7});
  const NeighborMatrices nb{{7, random_matrix(3, 2, rng)}};
  CHECK(max_abs(update_b(UpdateWorkspace(t), s, nb, cfg) - 0.5 * (s.B + nb.at(7))) <= 1e-14);
  const NeighborMatrices nc{{7, random_matrix(4, 2, rng)}};
  CHECK(max_abs(update_c(UpdateWorkspace(t), s, nc, cfg) - 0.5 * (s.C + nc.at(7))) <= 1e-14);
}

TEST_CASE("a huge penalty keeps B at the agreed copy") {
  Instance in = random_instance(14);
  for (auto& [n, g] : in.s.gamma) g.setZero();
  for (auto& [n, b] : in.nb_B) b = in.s.B;
  in.cfg.penalty_mu = 1e9;
  CHECK(max_abs(update_b(in.ws, in.s, in.nb_B, in.cfg) - in.s.B) <= 1e-6);
}

TEST_CASE("update_c recovers C from exact A and B on full data") {
  std::mt19937_64 rng(15);
  const FactorTriple f = random_triple({5, 4, 6}, 3, rng);
  const MaskedTensor3 t = MaskedTensor3::fully_observed(reconstruct(f));
  AdmmConfig cfg;
  cfg.rank = 3;
  AdmmAreaState s = make_area_state(FactorTriple(f.A, f.B, f.C), {2});
  const NeighborMatrices nc{{2, f.C}};
  CHECK(max_abs(update_c(UpdateWorkspace(t), s, nc, cfg) - f.C) <= 1e-8);
}

TEST_CASE("missing neighbor copies are reported") {
  const Instance in = random_instance(16);
  NeighborMatrices partial = in.nb_B;
  partial.erase(4);
  CHECK_THROWS_AS(update_b(in.ws, in.s, partial, in.cfg), ArgumentError);
}

TEST_CASE("each block update minimizes its block of the augmented Lagrangian") {
  Instance in = random_instance(17);
  std::mt19937_64 rng(99);
  const Matrix A = update_a(in.ws, in.s, in.cfg);
  auto block_a = [&](const Matrix& X) {
    return local_objective(in.ws, X, in.s.B, in.s.C) + 0.5 * in.cfg.ridge_eps * X.squaredNorm();
  };
  CHECK(block_a(A) <= block_a(in.s.A));
  for (int trial = 0; trial < 5; ++trial) CHECK(block_a(A) <= block_a(A + 1e-3 * random_matrix(4, 2, rng)));

  in.s.A = A;
  const Matrix B = update_b(in.ws, in.s, in.nb_B, in.cfg);
  const Matrix Bk = in.s.B;
  CHECK(block_b(in, A, B, in.s.C, Bk) <= block_b(in, A, Bk, in.s.C, Bk));
  for (int trial = 0; trial < 5; ++trial)
    CHECK(block_b(in, A, B, in.s.C, Bk) <= block_b(in, A, B + 1e-3 * random_matrix(3, 2, rng), in.s.C, Bk));
}

TEST_CASE("update_duals") {
  Instance in = random_instance(18);
  NeighborMatrices same_B{{1, in.s.B}, {4, in.s.B}}, same_C{{1, in.s.C}, {4, in.s.C}};
  const auto before = in.s.gamma;
  CHECK(update_duals(in.s, same_B, same_C) == 0.0);
  CHECK(in.s.gamma.at(1) == before.at(1));

  std::mt19937_64 rng(19);
  AdmmAreaState s = make_area_state(random_triple({2, 3, 4}, 2, rng), {5});
  const Matrix U = random_matrix(3, 2, rng);
  const NeighborMatrices nb{{5, s.B - 2.0 * U}}, nc{{5, s.C}};
  const double sq = update_duals(s, nb, nc);
  CHECK(max_abs(s.gamma.at(5) - U) <= 1e-15);
  CHECK(sq == doctest::Approx(U.squaredNorm()));
}

TEST_CASE("kkt residuals vanish at an exact consensus point") {
  std::mt19937_64 rng(20);
  const FactorTriple f = random_triple({6, 4, 5}, 2, rng);
  const MaskedTensor3 t = MaskedTensor3::fully_observed(reconstruct(f));
  AdmmConfig cfg;
  cfg.rank = 2;
  AdmmAreaState s = make_area_state(f, {1});
  const NeighborMatrices nb{{1, f.B}}, nc{{1, f.C}};
  const AreaResiduals r = kkt_residuals(UpdateWorkspace(t), s, nb, nc, cfg);
  CHECK(r.stationarity_a <= 1e-8);
  CHECK(r.stationarity_b <= 1e-8);
  CHECK(r.stationarity_c <= 1e-8);
  CHECK(r.consensus_B == 0.0);
  CHECK(r.consensus_C == 0.0);

  AdmmAreaState alone = make_area_state(random_triple({6, 4, 5}, 2, rng), {});
  const AreaResiduals single = kkt_residuals(UpdateWorkspace(t), alone, {}, {}, cfg);
  CHECK(single.consensus_B == 0.0);
  CHECK(single.consensus_C == 0.0);
}

TEST_CASE("masked objective is invariant to permutation and product-one scaling") {
  const Instance in = random_instance(21);
  const FactorTriple f(in.s.A, in.s.B, in.s.C);
  FactorTriple g = f;
  g.A.col(0) = f.A.col(1) * 4.0;
  g.B.col(0) = f.B.col(1) * -0.5;
  g.C.col(0) = f.C.col(1) * -0.5;
  g.A.col(1) = f.A.col(0) / 3.0;
  g.B.col(1) = f.B.col(0) * 3.0;
  g.C.col(1) = f.C.col(0);
  const double a = masked_objective(in.t, f), b = masked_objective(in.t, g);
  CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, a));
  CHECK(local_objective(in.ws, f.A, f.B, f.C) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("init_local_cpd") {
  std::mt19937_64 rng(22);
  const FactorTriple f = random_triple({6, 5, 7}, 3, rng);
  const MaskedTensor3 full = MaskedTensor3::fully_observed(reconstruct(f));
  const InitResult r = init_local_cpd(full, 3, 50, 4);
  CHECK(masked_objective(full, r.factors) <= 1e-8);
  CHECK(r.warnings.empty());
  const InitResult again = init_local_cpd(full, 3, 50, 4);
  CHECK(again.factors.A == r.factors.A);

  Vector a = Vector::LinSpaced(4, 1.0, 2.0), b(3), c(5);
  b << 1.0, -2.0, 0.5;
  c << 0.3, 1.0, -1.0, 2.0, 0.7;
  const Tensor3 X1 = reconstruct(FactorTriple(a, b, c));
  const InitResult one = init_local_cpd(MaskedTensor3::fully_observed(X1), 1, 300, 1, 0.0);
  CHECK(relative_error(X1, reconstruct(one.factors)) <= 1e-10);

  const MaskedTensor3 zero = MaskedTensor3::fully_observed(Tensor3({3, 3, 3}, 0.0));
  CHECK(frobenius_norm(reconstruct(init_local_cpd(zero, 2, 20, 1).factors)) <= 1e-6);

  Mask3 m(full.dims(), 1);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) m(i, j, 6) = 0;
  const InitResult holes = init_local_cpd(full.with_mask(m), 3, 10, 1);
  REQUIRE(holes.warnings.size() == 1);
  CHECK(holes.warnings[0].find("1 time row(s)") != std::string::npos);
  CHECK(holes.warnings[0].find("(7)") != std::string::npos);

  CHECK_THROWS_AS(init_local_cpd(full, 0, 10, 1), ArgumentError);
}

TEST_CASE("alignment helpers") {
  std::mt19937_64 rng(23);
  const Partition chain = Partition::contiguous({2, 2, 2, 2}, Partition::chain(4));
  CHECK(graph_diameter(chain) == 3);
  const AlignmentTree tree = alignment_tree(chain);
  CHECK(tree.parent == std::vector<std::size_t>{0, 0, 1, 2});
  CHECK(tree.max_depth == 3);
  AdmmConfig cfg;
  CHECK(init_rounds(chain, cfg) == 6);
  cfg.align_init = false;
  CHECK(init_rounds(chain, cfg) == 0);
  CHECK(graph_diameter(Partition::contiguous({2, 2, 2}, Partition::complete(3))) == 1);

  const FactorTriple f = random_triple({3, 5, 6}, 3, rng);
  AdmmAreaState s = make_area_state(FactorTriple(Matrix(3, 3), Matrix(5, 3), Matrix(6, 3)), {});
  const Eigen::Index perm[3] = {2, 0, 1};
  const double scale[3] = {2.0, -0.5, 3.0};
  for (Eigen::Index c = 0; c < 3; ++c) {
    s.A.col(c) = f.A.col(perm[c]);
    s.B.col(c) = f.B.col(perm[c]) * scale[c];
    s.C.col(c) = f.C.col(perm[c]) / scale[c];
  }
  const ObservedRows rows{{0, 1, 2, 3, 4}, {0, 1, 2, 3, 4, 5}};
  REQUIRE(align_to_neighbor(s, rows, f.B, f.C, rows));
  CHECK(max_abs(s.B - f.B) <= 1e-12);
  CHECK(max_abs(s.C - f.C) <= 1e-12);
  CHECK(max_abs(s.A - f.A) <= 1e-12);
  CHECK_FALSE(align_to_neighbor(s, {{0}, {}}, f.B, f.C, rows));

  AdmmAreaState t = make_area_state(FactorTriple(Matrix::Zero(2, 3), Matrix::Zero(5, 3), Matrix::Zero(6, 3)), {1, 2});
  ObservedRows known{{0, 1}, {0}};
  std::map<std::size_t, AreaSnapshot> nb;
  nb[1] = {Matrix::Constant(5, 3, 1.0), Matrix::Constant(6, 3, 1.0), {{2, 3}, {1}}};
  nb[2] = {Matrix::Constant(5, 3, 3.0), Matrix::Constant(6, 3, 3.0), {{3}, {}}};
  CHECK(fill_unknown_rows(t, known, nb) == 3);
  CHECK(t.B(2, 0) == 1.0);
  CHECK(t.B(3, 0) == 2.0);
  CHECK(t.B(4, 0) == 0.0);
  CHECK(t.C(1, 0) == 1.0);
  CHECK(known.measurements == IndexSet{0, 1, 2, 3});
  CHECK(known.times == IndexSet{0, 1});
}

TEST_CASE("run_admm recovers a fully observed two-area tensor") {
  const Dims3 d{12, 5, 10};
  std::mt19937_64 rng(24);
  const Tensor3 X = reconstruct(random_triple(d, 2, rng));
  const Partition p = Partition::contiguous({6, 6}, Partition::chain(2));
  AdmmConfig cfg;
  cfg.rank = 2;
  cfg.max_iters = 200;
  const AdmmResult r = run_admm(MaskedTensor3::fully_observed(X), p, cfg);
  CHECK(r.iterations <= 200);
  CHECK(relative_error(X, reconstruct(r.factors)) <= 1e-6);
  CHECK(r.trace.rows.size() == r.iterations);
  for (const auto& row : r.trace.rows) {
    CHECK(row.max_consensus_B >= 0.0);
    CHECK(row.dual_antisymmetry <= 1e-10);
  }
}

TEST_CASE("run_admm with zero iterations returns the initialization") {
  const Dims3 d{8, 3, 6};
  std::mt19937_64 rng(25);
  const MaskedTensor3 t(reconstruct(random_triple(d, 2, rng)), random_mask(d, 0.7, rng));
  const Partition p = Partition::contiguous({4, 4}, Partition::chain(2));
  AdmmConfig cfg;
  cfg.rank = 2;
  cfg.max_iters = 0;
  const AdmmResult r = run_admm(t, p, cfg);
  CHECK(r.trace.rows.empty());
  CHECK(r.iterations == 0);
  const auto init = initialize_areas(split_areas(t, p), cfg);
  const FactorTriple g = assemble_global(p, init);
  CHECK(r.factors.A == g.A);
  CHECK(r.factors.B == g.B);
}

TEST_CASE("run_admm is identical in serial and parallel execution") {
  const Dims3 d{15, 4, 10};
  std::mt19937_64 rng(26);
  const MaskedTensor3 t(reconstruct(random_triple(d, 2, rng)), random_mask(d, 0.5, rng));
  const Partition p = Partition::contiguous({5, 5, 5}, Partition::chain(3));
  AdmmConfig cfg;
  cfg.rank = 2;
  cfg.max_iters = 30;
  cfg.init_iters = 30;
  cfg.init_restarts = 2;
  const AdmmResult serial = run_admm(t, p, cfg);
  cfg.threads = 3;
  const AdmmResult parallel = run_admm(t, p, cfg);
  CHECK(serial.factors.A == parallel.factors.A);
  CHECK(serial.factors.C == parallel.factors.C);
  CHECK(serial.trace.to_csv() == parallel.trace.to_csv());
}

TEST_CASE("dual antisymmetry holds on a three-area chain") {
  const Dims3 d{15, 4, 10};
  std::mt19937_64 rng(27);
  const MaskedTensor3 t(reconstruct(random_triple(d, 2, rng)), random_mask(d, 0.4, rng));
  const Partition p = Partition::contiguous({5, 5, 5}, Partition::chain(3));
  AdmmConfig cfg;
  cfg.rank = 2;
  cfg.max_iters = 40;
  cfg.kkt_tol = 1e-300;
  const AdmmResult r = run_admm(t, p, cfg);
  REQUIRE(r.trace.rows.size() == 40);
  for (const auto& row : r.trace.rows) CHECK(row.dual_antisymmetry <= 1e-10);
  const Matrix sum = r.states[0].gamma.at(1) + r.states[1].gamma.at(0);
  CHECK(max_abs(sum) <= 1e-10);
}

TEST_CASE("non-finite iterates raise a divergence error") {
  std::mt19937_64 rng(28);
  std::vector<AdmmAreaState> states{make_area_state(random_triple({2, 2, 2}, 1, rng), {})};
  CHECK_NOTHROW(check_finite(states, 3));
  states[0].C(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    check_finite(states, 3);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() == 3);
  }
}

TEST_CASE("trace CSV header") {
  ConvergenceTrace t;
  t.rows.push_back({});
  t.rows.back().iter = 1;
  const std::string csv = t.to_csv();
  CHECK(csv.rfind("iter,objective,max_consensus_B,max_consensus_C,max_stationarity,dual_delta\n", 0) == 0);
  CHECK(csv.find("\n1,0,0,0,0,0\n") != std::string::npos);
}

TEST_CASE("centralized_als") {
  std::mt19937_64 rng(29);
  const FactorTriple f = random_triple({7, 5, 6}, 3, rng);
  const MaskedTensor3 t = MaskedTensor3::fully_observed(reconstruct(f));
  const AlsResult r = centralized_als(t, 3, 300, 2);
  REQUIRE(r.objective.size() == 300);
  for (std::size_t n = 1; n < r.objective.size(); ++n)
    CHECK(r.objective[n] <= r.objective[n - 1] * (1.0 + 1e-12) + 1e-15);
  FactorTriple near = f;
  near.A += 1e-2 * random_matrix(7, 3, rng);
  near.B += 1e-2 * random_matrix(5, 3, rng);
  const AlsResult close = centralized_als(t, near, 300);
  CHECK(close.objective.back() <= 1e-10);
  CHECK_THROWS_AS(centralized_als(t, 0, 10, 1), ArgumentError);
}

TEST_CASE("rank_sweep") {
  std::mt19937_64 rng(30);
  const MaskedTensor3 t = MaskedTensor3::fully_observed(reconstruct(random_triple({8, 5, 9}, 3, rng)));
  const auto curve = rank_sweep(t, 5, 300, 1);
  REQUIRE(curve.size() == 5);
  CHECK(curve[2].relative_error <= 1e-8);
  for (std::size_t n = 1; n < curve.size(); ++n) CHECK(curve[n].relative_error <= curve[n - 1].relative_error);

  Vector a = Vector::LinSpaced(3, 1, 3), b = Vector::LinSpaced(4, -1, 1), c = Vector::LinSpaced(2, 2, 5);
  const auto one = rank_sweep(MaskedTensor3::fully_observed(reconstruct(FactorTriple(a, b, c))), 1, 50, 1);
  CHECK(one[0].relative_error <= 1e-10);

  Tensor3 noise({6, 6, 6});
  std::normal_distribution<double> normal;
  for (auto& v : noise.values()) v = normal(rng);
  const auto rough = rank_sweep(MaskedTensor3::fully_observed(noise), 2, 100, 1);
  CHECK(rough[0].relative_error > 0.5);
  CHECK(rough[1].relative_error > 0.3);
}
