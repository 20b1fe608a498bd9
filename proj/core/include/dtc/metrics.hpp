#pragma once

// Accuracy metrics for completed state tensors.

#include <cstddef>
#include <optional>
#include <span>

#include "dtc/tensor.hpp"

namespace dtc {

/// Mean of |a - e| / |a| times 100. Throws ArgumentError on length mismatch,
/// empty input or a zero actual value (use compute_mae there).
double compute_mape(std::span<const double> actual, std::span<const double> estimated);

/// Mean of |a - e|. Throws ArgumentError on length mismatch or empty input.
double compute_mae(std::span<const double> actual, std::span<const double> estimated);

struct Phasor {
  double magnitude = 0.0;
  double angle_deg = 0.0;  ///< atan2(im, re) in degrees; 0 for the zero phasor
};

Phasor derive_vmag_angle(double real_v, double imag_v);

enum class ScoreSet { Unobserved, All };

struct MetricsReport {
  ScoreSet scored = ScoreSet::Unobserved;
  std::size_t scored_entries = 0;
  /// ||X - Y||_F / ||X||_F over the whole tensor.
  double relative_error = 0.0;
  /// sum |x - y| / sum |x| over the scored entries.
  double relative_mae = 0.0;
  /// Power-system metrics; empty for other layouts or when a type has no
  /// scored entry.
  std::optional<double> mape_vmag_pct;
  std::optional<double> mae_angle_deg;
  std::optional<double> mae_p;
  std::optional<double> mae_q;
};

/// Scores `estimate` against `truth` over the entries the mask leaves
/// unobserved (or all entries). The angle at (phase, time) is scored when
/// its real or imaginary part is in the scored set.
MetricsReport score(const Tensor3& truth, const Tensor3& estimate, const Mask3& mask,
                    ScoreSet set, bool power_layout);

}  // namespace dtc
