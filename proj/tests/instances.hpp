#pragma once

// Shared problem instances for the unit and acceptance tests.

#include <cstdint>
#include <random>

#include "dtc/dataset.hpp"
#include "dtc/sampling.hpp"
#include "dtc/tensor.hpp"

namespace dtc::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix M(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) M(r, c) = normal(rng);
  return M;
}

inline FactorTriple random_triple(const Dims3& d, std::size_t rank, std::mt19937_64& rng) {
  const auto F = static_cast<Eigen::Index>(rank);
  Matrix A = random_matrix(static_cast<Eigen::Index>(d.I), F, rng);
  Matrix B = random_matrix(static_cast<Eigen::Index>(d.J), F, rng);
  Matrix C = random_matrix(static_cast<Eigen::Index>(d.K), F, rng);
  return FactorTriple(std::move(A), std::move(B), std::move(C));
}

inline Mask3 random_mask(const Dims3& d, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(density);
  Mask3 m(d);
  for (auto& v : m.values()) v = keep(rng) ? 1 : 0;
  return m;
}

inline Partition chain3() { return Partition::contiguous({20, 20, 20}, Partition::chain(3)); }

inline constexpr Dims3 kDims{60, 5, 72};
inline constexpr std::size_t kRank = 4;

// Eight drawn phases per area observed over a time window, plus frontal
// slabs every `frontal_step` times starting at 1, 5 and 9.
inline SamplingScheme slab_scheme(const Partition& p, std::size_t frontal_step = 12,
                                  bool area2_frontal = true) {
  const IndexSet windows[3] = {one_based_range(1, 1, 36), one_based_range(24, 1, 48),
                               one_based_range(30, 1, 72)};
  const std::size_t starts[3] = {1, 5, 9};
  SamplingScheme s;
  s.areas.resize(3);
  for (std::size_t a = 0; a < 3; ++a) {
    s.areas[a].components.push_back(
        HorizontalSlab{draw_phases(p.phases(a), 8, 100 + a), windows[a]});
    if (a == 1 && !area2_frontal) continue;
    s.areas[a].components.push_back(FrontalSlab{one_based_range(starts[a], frontal_step, kDims.K)});
  }
  return s;
}

// Every phase of an area observed on a subset of measurement types.
inline SamplingScheme fiber_scheme(const Partition& p) {
  const IndexSet measurements[3] = {{0, 1, 2}, {2, 3, 4}, {2, 3}};
  const IndexSet times[3] = {one_based_range(1, 2, 72), one_based_range(1, 1, 72),
                             one_based_range(1, 3, 72)};
  SamplingScheme s;
  s.areas.resize(3);
  for (std::size_t a = 0; a < 3; ++a)
    s.areas[a].components.push_back(Fiber{p.phases(a), measurements[a], times[a]});
  return s;
}

}  // namespace dtc::testing
