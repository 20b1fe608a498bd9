#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtc/sampling.hpp"
#include "instances.hpp"

using namespace dtc;

namespace {

std::size_t count(const Mask3& m) { return static_cast<std::size_t>(std::count(m.values().begin(), m.values().end(), 1)); }

Partition two_areas_87() { return Partition::contiguous({87, 87}, Partition::chain(2)); }

}  // namespace

TEST_CASE("one_based_range is inclusive and zero-based on output") {
  CHECK(one_based_range(1, 12, 72) == IndexSet{0, 12, 24, 36, 48, 60});
  CHECK(one_based_range(5, 1, 7) == IndexSet{4, 5, 6});
  CHECK(one_based_range(3, 1, 2).empty());
  CHECK_THROWS_AS(one_based_range(0, 1, 3), ArgumentError);
  CHECK_THROWS_AS(one_based_range(1, 0, 3), ArgumentError);
}

TEST_CASE("Partition validation") {
  CHECK_NOTHROW(Partition(3, {{0, 2}, {1}}, {{1}, {0}}));
  CHECK_THROWS_AS(Partition(3, {{0, 1}, {1, 2}}, {{1}, {0}}), ArgumentError);
  CHECK_THROWS_AS(Partition(3, {{0}, {1}}, {{1}, {0}}), ArgumentError);
  CHECK_THROWS_AS(Partition(3, {{0, 1, 2}, {}}, {{1}, {0}}), ArgumentError);
  CHECK_THROWS_AS(Partition(2, {{0}, {1}}, {{1}, {}}), ArgumentError);
  CHECK_THROWS_AS(Partition(2, {{0}, {1}}, {{0}, {}}), ArgumentError);
  const Partition p = Partition::contiguous({2, 3, 1}, Partition::chain(3));
  CHECK(p.phases(1) == IndexSet{2, 3, 4});
  CHECK(p.adjacent(0, 1));
  CHECK_FALSE(p.adjacent(0, 2));
  CHECK(p.edges() == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 2}});
  CHECK(Partition::complete(3)[1] == IndexSet{0, 2});
}

TEST_CASE("frontal slab every 12 steps on an 87-phase area observes 2610 entries") {
  const Partition p = two_areas_87();
  const Dims3 d{174, 5, 72};
  SamplingScheme s;
  s.areas.resize(2);
  s.areas[0].components.push_back(FrontalSlab{{0, 12, 24, 36, 48, 60}});
  const Mask3 m = build_mask(p, s, d);
  CHECK(count(m) == 87 * 5 * 6);
  for (std::size_t i = 87; i < 174; ++i) CHECK(m(i, 0, 0) == 0);
}

TEST_CASE("fiber on measurements 3 to 5 observes 87*3*72 entries") {
  const Partition p = two_areas_87();
  const Dims3 d{174, 5, 72};
  SamplingScheme s;
  s.areas.resize(2);
  s.areas[1].components.push_back(Fiber{p.phases(1), {2, 3, 4}, one_based_range(1, 1, 72)});
  const Mask3 m = build_mask(p, s, d);
  CHECK(count(m) == 87 * 3 * 72);
  CHECK(m(100, 1, 5) == 0);
  CHECK(m(100, 2, 5) == 1);
}

TEST_CASE("empty time window gives an empty mask") {
  const Partition p = two_areas_87();
  SamplingScheme s;
  s.areas.resize(2);
  s.areas[0].components.push_back(HorizontalSlab{{0, 1}, {}});
  CHECK(count(build_mask(p, s, {174, 5, 72})) == 0);
}

TEST_CASE("horizontal slab observes every measurement in its window") {
  const Partition p = Partition::contiguous({4, 4}, Partition::chain(2));
  const Dims3 d{8, 3, 10};
  AreaSampling a;
  a.components.push_back(HorizontalSlab{{1, 3}, {2, 3, 4}});
  const Mask3 m = build_area_mask(p, 0, a, d);
  CHECK(count(m) == 2 * 3 * 3);
  CHECK(m(1, 2, 4) == 1);
  CHECK(m(1, 2, 5) == 0);
  CHECK(m(0, 0, 3) == 0);
}

TEST_CASE("mixed scheme mask is the union of its components") {
  const Partition p = Partition::contiguous({5, 5}, Partition::chain(2));
  const Dims3 d{10, 4, 12};
  const SamplingComponent c1 = HorizontalSlab{{0, 2}, one_based_range(1, 1, 6)};
  const SamplingComponent c2 = FrontalSlab{one_based_range(2, 4, 12)};
  const SamplingComponent c3 = Fiber{{1, 4}, {0, 3}, one_based_range(1, 2, 12)};
  AreaSampling mixed{{c1, c2, c3}};
  const Mask3 m = build_area_mask(p, 0, mixed, d);
  Mask3 u(d, 0);
  for (const auto& c : {c1, c2, c3}) {
    const Mask3 part = build_area_mask(p, 0, AreaSampling{{c}}, d);
    for (std::size_t n = 0; n < u.size(); ++n) u.values()[n] |= part.values()[n];
  }
  CHECK(m == u);
}

TEST_CASE("frontal slabs never observe a partial measurement column") {
  const Partition p = dtc::testing::chain3();
  const Mask3 m = build_mask(p, dtc::testing::slab_scheme(p), dtc::testing::kDims);
  const Dims3& d = m.dims();
  for (std::size_t i = 0; i < d.I; ++i)
    for (std::size_t k = 0; k < d.K; ++k) {
      std::size_t seen = 0;
      for (std::size_t j = 0; j < d.J; ++j) seen += m(i, j, k);
      CHECK((seen == 0 || seen == d.J));
    }
}

TEST_CASE("validate_scheme rejects indices outside the area or the tensor") {
  const Partition p = Partition::contiguous({3, 3}, Partition::chain(2));
  const Dims3 d{6, 2, 4};
  SamplingScheme s;
  s.areas.resize(2);
  s.areas[0].components.push_back(HorizontalSlab{{4}, {0}});
  CHECK_THROWS_AS(validate_scheme(p, s, d), ArgumentError);
  CHECK_THROWS_AS(build_mask(p, s, d), ArgumentError);
  s.areas[0].components = {FrontalSlab{{4}}};
  CHECK_THROWS_AS(validate_scheme(p, s, d), ArgumentError);
  s.areas[0].components = {Fiber{{0}, {2}, {0}}};
  CHECK_THROWS_AS(validate_scheme(p, s, d), ArgumentError);
  s.areas.resize(1);
  CHECK_THROWS_AS(validate_scheme(p, s, d), ArgumentError);
}

TEST_CASE("draw_phases is a seeded sorted draw") {
  IndexSet candidates(20);
  std::iota(candidates.begin(), candidates.end(), 40);
  const IndexSet a = draw_phases(candidates, 8, 3), b = draw_phases(candidates, 8, 3);
  CHECK(a == b);
  CHECK(a.size() == 8);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  for (std::size_t v : a) CHECK((v >= 40 && v < 60));
  CHECK(draw_phases(candidates, 8, 4) != a);
  CHECK_THROWS_AS(draw_phases(candidates, 21, 1), ArgumentError);
}

TEST_CASE("masks are deterministic") {
  const Partition p = dtc::testing::chain3();
  CHECK(build_mask(p, dtc::testing::slab_scheme(p), dtc::testing::kDims) ==
        build_mask(p, dtc::testing::slab_scheme(p), dtc::testing::kDims));
}

TEST_CASE("add_noise") {
  const Dims3 d{100, 1, 100};
  Tensor3 ones(d, 1.0);
  ones(0, 0, 0) = 0.0;
  Mask3 mask(d, 1);
  mask(0, 0, 1) = 0;
  const MaskedTensor3 t(ones, mask);

  CHECK(add_noise(t, 0.0, 5).data() == t.data());
  CHECK_THROWS_AS(add_noise(t, -0.1, 5), ArgumentError);

  const MaskedTensor3 n = add_noise(t, 0.01, 5);
  CHECK(n.mask() == t.mask());
  CHECK(n.data()(0, 0, 0) == 0.0);
  CHECK(n.data()(0, 0, 1) == 1.0);
  CHECK(add_noise(t, 0.01, 5).data() == n.data());

  double sum = 0.0, sq = 0.0;
  std::size_t cnt = 0;
  for (std::size_t n_ = 0; n_ < d.size(); ++n_) {
    if (n_ < 2) continue;
    const double e = n.data().values()[n_] - 1.0;
    sum += e;
    sq += e * e;
    ++cnt;
  }
  const double mean = sum / static_cast<double>(cnt);
  const double sd = std::sqrt(sq / static_cast<double>(cnt) - mean * mean);
  CHECK(sd >= 0.009);
  CHECK(sd <= 0.011);
}
