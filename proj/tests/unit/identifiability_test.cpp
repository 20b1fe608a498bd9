#include <doctest.h>

#include <cmath>
#include <random>

#include "dtc/identifiability.hpp"
#include "instances.hpp"

using namespace dtc;
using dtc::testing::random_matrix;

namespace {

// The three-area feeder layout: 263 phases split 87 / 87 / 89.
Partition feeder() { return Partition::contiguous({87, 87, 89}, Partition::chain(3)); }
constexpr Dims3 kFeeder{263, 5, 72};

SamplingScheme feeder_slab_case1(const Partition& p, bool area2_frontal = true) {
  const IndexSet windows[3] = {one_based_range(1, 1, 36), one_based_range(24, 1, 48),
                               one_based_range(30, 1, 72)};
  const std::size_t starts[3] = {1, 5, 9};
  SamplingScheme s;
  s.areas.resize(3);
  for (std::size_t a = 0; a < 3; ++a) {
    s.areas[a].components.push_back(HorizontalSlab{draw_phases(p.phases(a), 8, 7 + a), windows[a]});
    if (a == 1 && !area2_frontal) continue;
    s.areas[a].components.push_back(FrontalSlab{one_based_range(starts[a], 12, 72)});
  }
  return s;
}

SamplingScheme feeder_fiber(const Partition& p) {
  const IndexSet m[3] = {{0, 1, 2}, {2, 3, 4}, {2, 3}};
  const IndexSet t[3] = {one_based_range(1, 2, 72), one_based_range(1, 1, 72),
                         one_based_range(1, 4, 72)};
  SamplingScheme s;
  s.areas.resize(3);
  for (std::size_t a = 0; a < 3; ++a) s.areas[a].components.push_back(Fiber{p.phases(a), m[a], t[a]});
  return s;
}

IdentifiableSets sets(IndexSet m, IndexSet t) { return {{}, std::move(m), std::move(t)}; }

FactorFragment random_fragment(std::mt19937_64& rng, Eigen::Index I, Eigen::Index J,
                               Eigen::Index K, Eigen::Index F) {
  return {random_matrix(I, F, rng), random_matrix(J, F, rng), random_matrix(K, F, rng)};
}

double max_abs_rows(const Matrix& X, const Matrix& Y, const IndexSet& rows) {
  double worst = 0.0;
  for (std::size_t r : rows)
    worst = std::max(worst, (X.row(static_cast<Eigen::Index>(r)) - Y.row(static_cast<Eigen::Index>(r)))
                                .cwiseAbs()
                                .maxCoeff());
  return worst;
}

}  // namespace

TEST_CASE("slab uniqueness for the first slab case at rank 7") {
  AreaSamplingStats s{SubtensorKind::Slab, 8, 5, 36, 6, 72};
  const UniquenessReport r = local_uniqueness_check(s, 7);
  CHECK(r.unique);
  REQUIRE(r.terms.size() == 4);
  CHECK(r.terms[0].value == 5.0);
  CHECK(r.terms[1].value == 8.0);
  CHECK(r.terms[2].value == 7.0);
  CHECK(r.terms[3].value == doctest::Approx(std::log2(120.0)));
  CHECK(r.min_term == 5.0);
  CHECK(r.required == doctest::Approx(std::log2(28.0)));
}

TEST_CASE("fiber uniqueness for the third fiber area at rank 7") {
  AreaSamplingStats s{SubtensorKind::Fiber, 89, 2, 18, 0, 72};
  const UniquenessReport r = local_uniqueness_check(s, 7);
  CHECK(r.unique);
  CHECK(r.min_term == 5.0);
}

TEST_CASE("a single sampled phase is not unique") {
  CHECK_FALSE(local_uniqueness_check({SubtensorKind::Slab, 1, 5, 36, 6, 72}, 2).unique);
  CHECK_FALSE(local_uniqueness_check({SubtensorKind::Fiber, 1, 3, 36, 0, 72}, 1).unique);
  CHECK_THROWS_AS(local_uniqueness_check({SubtensorKind::Slab, 8, 5, 36, 6, 72}, 0), ArgumentError);
}

TEST_CASE("the generic bound is reported in both readings") {
  const UniquenessReport r = local_uniqueness_check({SubtensorKind::FrontalOnly, 87, 5, 0, 72, 72}, 7);
  CHECK(r.generic_bound == 64.0);
  CHECK(r.generic_bound_conservative == 32.0);
  CHECK(r.generic_bound_holds);
  CHECK(r.unique);
  CHECK_FALSE(local_uniqueness_check({SubtensorKind::FrontalOnly, 87, 5, 0, 72, 72}, 65).unique);
}

TEST_CASE("identifiable sets of the slab scheme") {
  const Partition p = feeder();
  const auto ids = derive_identifiable_sets(p, feeder_slab_case1(p), kFeeder);
  REQUIRE(ids.size() == 3);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(ids[a].measurements == IndexSet{0, 1, 2, 3, 4});
    CHECK(ids[a].phases == p.phases(a));
  }
  IndexSet t1 = one_based_range(1, 1, 36);
  for (std::size_t t : {36, 48, 60}) t1.push_back(t);
  CHECK(ids[0].times == t1);
}

TEST_CASE("identifiable sets of the fiber scheme") {
  const Partition p = feeder();
  const auto ids = derive_identifiable_sets(p, feeder_fiber(p), kFeeder);
  CHECK(ids[0].measurements == IndexSet{0, 1, 2});
  CHECK(ids[1].measurements == IndexSet{2, 3, 4});
  CHECK(ids[2].measurements == IndexSet{2, 3});
  CHECK(ids[2].phases == p.phases(2));
}

TEST_CASE("empty scheme gives empty sets") {
  const Partition p = feeder();
  SamplingScheme s;
  s.areas.resize(3);
  for (const auto& ids : derive_identifiable_sets(p, s, kFeeder)) {
    CHECK(ids.phases.empty());
    CHECK(ids.measurements.empty());
    CHECK(ids.times.empty());
  }
}

TEST_CASE("mutual identifiability") {
  CHECK(mutual_identifiability(sets({0, 1}, {0, 5}), sets({1, 2}, {5, 0, 9})));
  CHECK_FALSE(mutual_identifiability(sets({0, 1}, {0}), sets({1, 2}, {0, 3})));
  const IndexSet fifty = one_based_range(1, 1, 50);
  CHECK_FALSE(mutual_identifiability(sets({0}, fifty), sets({1}, fifty)));
  CHECK(mutual_identifiability(sets({0, 1, 2}, {4}), sets({1, 2}, {4})));

  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    IdentifiableSets a, b;
    for (std::size_t v = 0; v < 6; ++v) {
      if (coin(rng)) a.measurements.push_back(v);
      if (coin(rng)) b.measurements.push_back(v);
      if (coin(rng)) a.times.push_back(v);
      if (coin(rng)) b.times.push_back(v);
    }
    CHECK(mutual_identifiability(a, b) == mutual_identifiability(b, a));
  }
}

TEST_CASE("slab and fiber schemes pass the full check at rank 7") {
  const Partition p = feeder();
  const auto slab = check_identifiability(p, feeder_slab_case1(p), 7, kFeeder);
  CHECK(slab.verdict);
  CHECK(slab.diagnostics.empty());
  CHECK(slab.graph.edges.size() == 3);
  const auto fiber = check_identifiability(p, feeder_fiber(p), 7, kFeeder);
  CHECK(fiber.verdict);
}

TEST_CASE("removing area 2's frontal slabs fails phase coverage") {
  const Partition p = feeder();
  const auto v = check_identifiability(p, feeder_slab_case1(p, false), 7, kFeeder);
  CHECK_FALSE(v.verdict);
  CHECK_FALSE(v.phase_coverage);
  CHECK(v.measurement_coverage);
  bool named = false;
  for (const auto& d : v.diagnostics) named |= d.rfind("area 2: P_n misses 79 of 87 phases", 0) == 0;
  CHECK(named);
}

TEST_CASE("fibers that skip a measurement fail measurement coverage") {
  const Partition p = feeder();
  SamplingScheme s = feeder_fiber(p);
  std::get<Fiber>(s.areas[1].components[0]).measurements = {2, 3};
  const auto v = check_identifiability(p, s, 7, kFeeder);
  CHECK_FALSE(v.verdict);
  CHECK_FALSE(v.measurement_coverage);
  REQUIRE(v.diagnostics.size() == 1);
  CHECK(v.diagnostics[0] == "union of M_n (measurements) misses 1 indices [5]");
  CHECK(v.render().find("measurement coverage  FAIL") != std::string::npos);
}

TEST_CASE("disjoint time windows disconnect the graph") {
  const Partition p = Partition::contiguous({10, 10}, Partition::chain(2));
  SamplingScheme s;
  s.areas.resize(2);
  s.areas[0].components.push_back(FrontalSlab{one_based_range(1, 1, 10)});
  s.areas[1].components.push_back(FrontalSlab{one_based_range(11, 1, 20)});
  const auto v = check_identifiability(p, s, 2, {20, 5, 20});
  CHECK_FALSE(v.verdict);
  CHECK_FALSE(v.graph_connected);
  CHECK(v.local_uniqueness);
  CHECK(v.diagnostics.back() == "identifiability graph disconnected: components [1] [2]");
}

TEST_CASE("a single fully observed area is recoverable") {
  const Partition p(12, {one_based_range(1, 1, 12)}, {{}});
  SamplingScheme s;
  s.areas.resize(1);
  s.areas[0].components.push_back(FrontalSlab{one_based_range(1, 1, 10)});
  CHECK(check_identifiability(p, s, 3, {12, 5, 10}).verdict);
}

TEST_CASE("adding observations never flips a passing verdict") {
  const Partition p = feeder();
  SamplingScheme s = feeder_slab_case1(p);
  REQUIRE(check_identifiability(p, s, 7, kFeeder).verdict);
  s.areas[0].components.push_back(Fiber{{3, 5}, {1}, {70}});
  s.areas[1].components.push_back(FrontalSlab{{71}});
  s.areas[2].components.push_back(HorizontalSlab{{180}, {0, 1}});
  CHECK(check_identifiability(p, s, 7, kFeeder).verdict);
}

TEST_CASE("align_factors recovers a two-column swap with scaling") {
  std::mt19937_64 rng(21);
  const FactorFragment ref = random_fragment(rng, 4, 5, 6, 2);
  FactorFragment other{Matrix(4, 2), Matrix(5, 2), Matrix(6, 2)};
  const double sb[2] = {3.0, 1.0 / 3.0};
  for (Eigen::Index c = 0; c < 2; ++c) {
    other.A.col(c) = ref.A.col(1 - c);
    other.B.col(c) = ref.B.col(1 - c) * sb[c];
    other.C.col(c) = ref.C.col(1 - c) / sb[c];
  }
  const IndexSet cm{0, 2}, ct{1};
  const FactorAlignment al = align_factors(ref, other, cm, ct);
  CHECK(al.permutation == std::vector<std::size_t>{1, 0});
  CHECK(al.scale_B(0) == doctest::Approx(3.0));
  CHECK(al.scale_B(1) == doctest::Approx(1.0 / 3.0));
  for (Eigen::Index f = 0; f < 2; ++f)
    CHECK(al.scale_A(f) * al.scale_B(f) * al.scale_C(f) == doctest::Approx(1.0).epsilon(1e-10));
  const FactorFragment back = apply_alignment(other, al);
  CHECK(max_abs_rows(back.B, ref.B, cm) <= 1e-10);
  CHECK(max_abs_rows(back.C, ref.C, ct) <= 1e-10);
  CHECK((back.A - ref.A).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("align_factors on identical fragments is the identity") {
  std::mt19937_64 rng(22);
  const FactorFragment ref = random_fragment(rng, 3, 5, 6, 3);
  const FactorAlignment al = align_factors(ref, ref, {0, 1, 2}, {0, 4});
  CHECK(al.permutation == std::vector<std::size_t>{0, 1, 2});
  for (Eigen::Index f = 0; f < 3; ++f) {
    CHECK(al.scale_A(f) == doctest::Approx(1.0));
    CHECK(al.scale_B(f) == doctest::Approx(1.0));
    CHECK(al.scale_C(f) == doctest::Approx(1.0));
  }
}

TEST_CASE("align_factors preconditions and failures") {
  std::mt19937_64 rng(23);
  const FactorFragment ref = random_fragment(rng, 3, 5, 6, 2);
  CHECK_THROWS_AS(align_factors(ref, ref, {1}, {2}), PreconditionError);
  CHECK_THROWS_AS(align_factors(ref, ref, {}, {1, 2, 3}), PreconditionError);
  const FactorFragment unrelated = random_fragment(rng, 3, 5, 6, 2);
  CHECK_THROWS_AS(align_factors(ref, unrelated, {0, 1, 2}, {0}), AlignmentError);

  FactorFragment twins = ref;
  twins.B.col(1) = twins.B.col(0) * 2.0;
  CHECK_THROWS_AS(align_factors(twins, twins, {0, 1}, {0}), AlignmentError);

  FactorFragment zeros = ref;
  zeros.B.col(0).setZero();
  CHECK_THROWS_AS(align_factors(zeros, zeros, {0, 1}, {0}), AlignmentError);
}

TEST_CASE("merge_fragments stitches scrambled area factors") {
  std::mt19937_64 rng(24);
  const Partition p = Partition::contiguous({4, 5, 3}, Partition::chain(3));
  const FactorTriple truth = dtc::testing::random_triple({12, 5, 9}, 3, rng);
  std::vector<IdentifiableSets> ids = {{p.phases(0), {0, 1, 2}, {0, 1, 2, 3}},
                                       {p.phases(1), {1, 2, 3}, {3, 4, 5, 6}},
                                       {p.phases(2), {3, 4}, {5, 6, 7, 8}}};
  std::vector<FactorFragment> fragments;
  const std::vector<std::size_t> perms[3] = {{0, 1, 2}, {2, 0, 1}, {1, 2, 0}};
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  for (std::size_t a = 0; a < 3; ++a) {
    FactorFragment f{Matrix(static_cast<Eigen::Index>(p.phases(a).size()), 3), Matrix(5, 3), Matrix(9, 3)};
    for (Eigen::Index c = 0; c < 3; ++c) {
      const auto src = static_cast<Eigen::Index>(perms[a][static_cast<std::size_t>(c)]);
      const double sb = scale(rng), sc = scale(rng);
      for (std::size_t r = 0; r < p.phases(a).size(); ++r)
        f.A(static_cast<Eigen::Index>(r), c) = truth.A(static_cast<Eigen::Index>(p.phases(a)[r]), src) / (sb * sc);
      f.B.col(c) = truth.B.col(src) * sb;
      f.C.col(c) = truth.C.col(src) * sc;
    }
    fragments.push_back(std::move(f));
  }
  const FactorTriple merged = merge_fragments(p, fragments, ids);
  CHECK(relative_error(reconstruct(truth), reconstruct(merged)) <= 1e-10);

  ids[2].times = {8};
  ids[2].measurements = {4};
  CHECK_THROWS_AS(merge_fragments(p, fragments, ids), PreconditionError);
}
