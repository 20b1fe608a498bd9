#include <doctest.h>

#include <cmath>
#include <vector>

#include "dtc/dataset.hpp"
#include "dtc/metrics.hpp"

using namespace dtc;

TEST_CASE("MAPE and MAE") {
  const std::vector<double> a{100.0, 200.0}, e{101.0, 198.0};
  CHECK(compute_mape(a, e) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> z{0.0, 1.0};
  CHECK_THROWS_AS(compute_mape(z, e), ArgumentError);
  const std::vector<double> x{1.0, 2.0}, y{2.0, 2.0};
  CHECK(compute_mae(x, y) == 0.5);
  CHECK_THROWS_AS(compute_mae(x, std::vector<double>{1.0}), ArgumentError);
  CHECK_THROWS_AS(compute_mae(std::vector<double>{}, std::vector<double>{}), ArgumentError);
}

TEST_CASE("phasor magnitude and angle") {
  Phasor p = derive_vmag_angle(1.0, 0.0);
  CHECK(p.magnitude == 1.0);
  CHECK(p.angle_deg == 0.0);
  p = derive_vmag_angle(0.0, 1.0);
  CHECK(p.angle_deg == doctest::Approx(90.0));
  p = derive_vmag_angle(-0.5, -0.866);
  CHECK(p.magnitude == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(p.angle_deg == doctest::Approx(-120.0).epsilon(1e-3));
  CHECK(derive_vmag_angle(0.0, 0.0).angle_deg == 0.0);
}

TEST_CASE("score over unobserved entries") {
  const Dims3 d{1, 5, 2};
  Tensor3 truth(d), est(d);
  for (std::size_t k = 0; k < 2; ++k) {
    truth(0, kVre, k) = 1.0;
    truth(0, kVim, k) = 0.0;
    truth(0, kVmag, k) = 1.0;
    truth(0, kP, k) = 2.0;
    truth(0, kQ, k) = -1.0;
  }
  est = truth;
  est(0, kVmag, 1) = 1.02;
  est(0, kP, 1) = 2.5;
  est(0, kVim, 1) = 1.0;
  est(0, kVre, 1) = 0.0;
  Mask3 m(d, 1);
  for (std::size_t j = 0; j < 5; ++j) m(0, j, 1) = 0;
  const MetricsReport r = score(truth, est, m, ScoreSet::Unobserved, true);
  CHECK(r.scored_entries == 5);
  CHECK(*r.mape_vmag_pct == doctest::Approx(2.0));
  CHECK(*r.mae_p == doctest::Approx(0.5));
  CHECK(*r.mae_q == 0.0);
  CHECK(*r.mae_angle_deg == doctest::Approx(90.0));
  CHECK(r.relative_mae == doctest::Approx((0.02 + 0.5 + 1.0 + 1.0) / 5.0));

  const MetricsReport all = score(truth, truth, m, ScoreSet::All, false);
  CHECK(all.scored_entries == 10);
  CHECK(all.relative_mae == 0.0);
  CHECK_FALSE(all.mape_vmag_pct);
  CHECK_THROWS_AS(score(truth, Tensor3({1, 5, 3}), m, ScoreSet::All, false), DimensionError);
}
