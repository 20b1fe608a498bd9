#include "dtc/metrics.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "dtc/dataset.hpp"

namespace dtc {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> e) {
  if (a.size() != e.size()) {
    throw ArgumentError("length mismatch: " + std::to_string(a.size()) + " actual vs " +
                        std::to_string(e.size()) + " estimated values");
  }
  if (a.empty()) throw ArgumentError("no values to score");
}

}  // namespace

double compute_mape(std::span<const double> actual, std::span<const double> estimated) {
  check_lengths(actual, estimated);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      throw ArgumentError("MAPE undefined: actual value at position " + std::to_string(i) +
                          " is zero; use MAE");
    }
    sum += std::abs(actual[i] - estimated[i]) / std::abs(actual[i]);
  }
  return 100.0 * sum / static_cast<double>(actual.size());
}

double compute_mae(std::span<const double> actual, std::span<const double> estimated) {
  check_lengths(actual, estimated);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - estimated[i]);
  return sum / static_cast<double>(actual.size());
}

Phasor derive_vmag_angle(double real_v, double imag_v) {
  return {std::hypot(real_v, imag_v), std::atan2(imag_v, real_v) * 180.0 / std::numbers::pi};
}

MetricsReport score(const Tensor3& truth, const Tensor3& estimate, const Mask3& mask,
                    ScoreSet set, bool power_layout) {
  const Dims3& d = truth.dims();
  if (!(estimate.dims() == d) || !(mask.dims() == d)) {
    throw DimensionError("truth " + to_string(d) + ", estimate " + to_string(estimate.dims()) +
                         " and mask " + to_string(mask.dims()) + " must match");
  }
  if (power_layout && d.J != kMeasurementTypes.size()) {
    throw DimensionError("power layout needs 5 measurement types");
  }
  MetricsReport r;
  r.scored = set;
  r.relative_error = relative_error(truth, estimate);
  auto scored = [&](std::size_t i, std::size_t j, std::size_t k) {
    return set == ScoreSet::All || mask(i, j, k) == 0;
  };
  double abs_err = 0.0, abs_truth = 0.0;
  std::vector<double> vmag_a, vmag_e, ang_a, ang_e, p_a, p_e, q_a, q_e;
  for (std::size_t i = 0; i < d.I; ++i) {
    for (std::size_t j = 0; j < d.J; ++j) {
      for (std::size_t k = 0; k < d.K; ++k) {
        if (!scored(i, j, k)) continue;
        ++r.scored_entries;
        abs_err += std::abs(truth(i, j, k) - estimate(i, j, k));
        abs_truth += std::abs(truth(i, j, k));
        if (!power_layout) continue;
        if (j == kVmag) {
          vmag_a.push_back(truth(i, j, k));
          vmag_e.push_back(estimate(i, j, k));
        } else if (j == kP) {
          p_a.push_back(truth(i, j, k));
          p_e.push_back(estimate(i, j, k));
        } else if (j == kQ) {
          q_a.push_back(truth(i, j, k));
          q_e.push_back(estimate(i, j, k));
        }
      }
      if (power_layout && j == kVim) {
        for (std::size_t k = 0; k < d.K; ++k) {
          if (!scored(i, kVre, k) && !scored(i, kVim, k)) continue;
          ang_a.push_back(derive_vmag_angle(truth(i, kVre, k), truth(i, kVim, k)).angle_deg);
          ang_e.push_back(derive_vmag_angle(estimate(i, kVre, k), estimate(i, kVim, k)).angle_deg);
        }
      }
    }
  }
  r.relative_mae = abs_truth > 0.0 ? abs_err / abs_truth : abs_err;
  if (!vmag_a.empty()) r.mape_vmag_pct = compute_mape(vmag_a, vmag_e);
  if (!ang_a.empty()) {
    // Angles wrap at +-180 degrees.
    for (std::size_t n = 0; n < ang_a.size(); ++n) {
      double diff = std::remainder(ang_e[n] - ang_a[n], 360.0);
      ang_e[n] = ang_a[n] + diff;
    }
    r.mae_angle_deg = compute_mae(ang_a, ang_e);
  }
  if (!p_a.empty()) r.mae_p = compute_mae(p_a, p_e);
  if (!q_a.empty()) r.mae_q = compute_mae(q_a, q_e);
  return r;
}

}  // namespace dtc
