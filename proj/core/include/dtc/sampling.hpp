#pragma once

// Area partitions and the slab/fiber sampling schemes used to build
// observation masks. All indices are 0-based; `one_based_range` converts the
// 1-based inclusive ranges that appear in experiment descriptions.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "dtc/tensor.hpp"

namespace dtc {

using IndexSet = std::vector<std::size_t>;

/// {first, first+step, ...} <= last, 1-based inclusive, returned 0-based.
IndexSet one_based_range(std::size_t first, std::size_t step, std::size_t last);

/// Split of the phase axis into N areas plus a symmetric communication graph.
class Partition {
 public:
  Partition() = default;
  /// Validates that area_phases cover {0..I-1} disjointly with no empty area,
  /// and that adjacency is symmetric without self loops. Neighbor lists are
  /// stored sorted.
  Partition(std::size_t num_phases, std::vector<IndexSet> area_phases,
            std::vector<IndexSet> adjacency);

  /// Consecutive areas of the given sizes.
  static Partition contiguous(const std::vector<std::size_t>& sizes,
                              std::vector<IndexSet> adjacency);
  /// Path graph 0 - 1 - ... - (n-1).
  static std::vector<IndexSet> chain(std::size_t n);
  /// Complete graph on n areas.
  static std::vector<IndexSet> complete(std::size_t n);

  std::size_t num_phases() const noexcept { return num_phases_; }
  std::size_t num_areas() const noexcept { return area_phases_.size(); }
  const IndexSet& phases(std::size_t area) const { return area_phases_.at(area); }
  const IndexSet& neighbors(std::size_t area) const { return adjacency_.at(area); }
  const std::vector<IndexSet>& area_phases() const noexcept { return area_phases_; }
  const std::vector<IndexSet>& adjacency() const noexcept { return adjacency_; }
  bool adjacent(std::size_t m, std::size_t n) const;
  /// Unordered edges (m < n).
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

 private:
  std::size_t num_phases_ = 0;
  std::vector<IndexSet> area_phases_;
  std::vector<IndexSet> adjacency_;
};

/// Selected phases observed for all measurements over a time window.
struct HorizontalSlab {
  IndexSet phases;
  IndexSet times;
};

/// Every phase of the area observed for all measurements at the given times.
struct FrontalSlab {
  IndexSet times;
};

/// Selected (phase, measurement) fibers observed at the given times.
struct Fiber {
  IndexSet phases;
  IndexSet measurements;
  IndexSet times;
};

using SamplingComponent = std::variant<HorizontalSlab, FrontalSlab, Fiber>;

/// Sampling of one area. More than one component makes a mixed scheme; its
/// mask is the union of the component masks.
struct AreaSampling {
  std::vector<SamplingComponent> components;
};

struct SamplingScheme {
  std::vector<AreaSampling> areas;
};

/// Seeded uniform draw of `count` distinct entries of `candidates`, sorted.
IndexSet draw_phases(const IndexSet& candidates, std::size_t count, std::uint64_t seed);

/// Throws ArgumentError when any index falls outside the area or tensor axes.
void validate_scheme(const Partition& p, const SamplingScheme& s, const Dims3& dims);

/// Mask of one area's components, over the full tensor.
Mask3 build_area_mask(const Partition& p, std::size_t area, const AreaSampling& s,
                      const Dims3& dims);

Mask3 build_mask(const Partition& p, const SamplingScheme& s, const Dims3& dims);

/// Adds N(0, (rel_std * |x|)^2) noise, truncated at 6 sigma, to observed
/// entries only. Throws ArgumentError for negative rel_std.
MaskedTensor3 add_noise(const MaskedTensor3& t, double rel_std, std::uint64_t seed);

}  // namespace dtc
