#pragma once

// State datasets: CSV ingestion, synthetic generators and per-row
// normalization.
//
// CSV long format, one cell per line:
//   phase_id,measurement_type,time_index,value
// measurement_type is one of vre, vim, vmag, p, q (mapped to measurement
// indices 1..5 in that order) or a positive integer index for generic
// tensors. time_index is 1-based. Phases are numbered in order of first
// appearance. Lines starting with '#' are skipped.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtc/tensor.hpp"

namespace dtc {

inline constexpr std::array<std::string_view, 5> kMeasurementTypes = {"vre", "vim", "vmag", "p",
                                                                      "q"};
inline constexpr std::size_t kVre = 0;
inline constexpr std::size_t kVim = 1;
inline constexpr std::size_t kVmag = 2;
inline constexpr std::size_t kP = 3;
inline constexpr std::size_t kQ = 4;

struct StateDataset {
  Tensor3 truth;
  AxisLabels labels;
  /// Generating factors of synthetic datasets.
  std::optional<FactorTriple> factors;

  /// True when the measurement axis is the five power-system types.
  bool power_layout() const;
};

/// Throws ParseError (with the offending line) on schema violations,
/// duplicate cells and missing cells.
StateDataset parse_dataset(std::istream& in);
StateDataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const StateDataset& d);

/// Factors drawn i.i.d. N(0, factor_scale^2). Throws ArgumentError for
/// rank 0 or an empty shape.
StateDataset synthesize_lowrank(const Dims3& dims, std::size_t rank, std::uint64_t seed,
                                double factor_scale = 1.0);

/// Low-rank tensor with the five power-system measurement types. The first
/// component carries per-type levels (vmag near 1 per unit); the others are
/// small perturbations.
StateDataset synthesize_power_like(std::size_t phases, std::size_t times, std::size_t rank,
                                   std::uint64_t seed);

/// Per-(phase, measurement) mean over observed times.
struct NormalizationState {
  Matrix mean;  ///< I x J
};

struct Normalized {
  MaskedTensor3 tensor;
  NormalizationState state;
  std::vector<std::string> warnings;
};

/// Subtracts the per-row temporal mean of observed entries from every entry.
/// Rows with no observed entry get mean 0 and a warning.
Normalized normalize(const MaskedTensor3& t);

Tensor3 denormalize(const Tensor3& t, const NormalizationState& s);

}  // namespace dtc
