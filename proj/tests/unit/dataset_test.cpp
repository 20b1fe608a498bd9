#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "dtc/dataset.hpp"

using namespace dtc;

namespace {

std::string thirty_rows() {
  std::ostringstream os;
  os << "phase_id,measurement_type,time_index,value\n";
  for (const char* phase : {"650a", "632b"})
    for (const auto& type : kMeasurementTypes)
      for (int k = 1; k <= 3; ++k) os << phase << ',' << type << ',' << k << ',' << k * 0.5 << '\n';
  return os.str();
}

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_dataset(in);
  } catch (const ParseError& e) {
    return e.line() + 1000;
  }
  return 0;
}

}  // namespace

TEST_CASE("a 30-row CSV becomes a 2 x 5 x 3 tensor") {
  std::istringstream in(thirty_rows());
  const StateDataset d = parse_dataset(in);
  CHECK(d.truth.dims() == Dims3{2, 5, 3});
  CHECK(d.power_layout());
  CHECK(d.labels.phases == std::vector<std::string>{"650a", "632b"});
  CHECK(d.truth(1, kQ, 2) == 1.5);

  std::ostringstream out;
  write_dataset(out, d);
  std::istringstream again(out.str());
  const StateDataset back = parse_dataset(again);
  CHECK(std::ranges::equal(back.truth.values(), d.truth.values()));
  CHECK(back.labels.phases == d.labels.phases);
}

TEST_CASE("CSV errors") {
  const std::string good = thirty_rows();
  CHECK(parse_error_line(good + "650a,vre,1,9\n") == 1000 + 32);
  std::string missing = good.substr(0, good.rfind("632b"));
  CHECK(parse_error_line(missing) == 1000);
  CHECK(parse_error_line("phase,type,time,value\n") == 1001);
  CHECK(parse_error_line("phase_id,measurement_type,time_index,value\n1,volts,1,2\n") == 1002);
  CHECK(parse_error_line("phase_id,measurement_type,time_index,value\n1,vre,0,2\n") == 1002);
  CHECK(parse_error_line("phase_id,measurement_type,time_index,value\n1,vre,1,abc\n") == 1002);
  CHECK(parse_error_line("phase_id,measurement_type,time_index,value\n1,vre,1\n") == 1002);
  CHECK(parse_error_line("phase_id,measurement_type,time_index,value\n1,vre,1,2\n1,2,1,2\n") == 1003);

  std::istringstream generic("# comment\nphase_id,measurement_type,time_index,value\nx,1,1,4\nx,2,1,5\n");
  const StateDataset g = parse_dataset(generic);
  CHECK(g.truth.dims() == Dims3{1, 2, 1});
  CHECK_FALSE(g.power_layout());
}

TEST_CASE("synthetic generators") {
  const StateDataset a = synthesize_lowrank({6, 4, 5}, 2, 9);
  const StateDataset b = synthesize_lowrank({6, 4, 5}, 2, 9);
  CHECK(std::ranges::equal(a.truth.values(), b.truth.values()));
  REQUIRE(a.factors);
  CHECK(relative_error(a.truth, reconstruct(*a.factors)) == 0.0);
  CHECK_FALSE(std::ranges::equal(synthesize_lowrank({6, 4, 5}, 2, 10).truth.values(), a.truth.values()));
  CHECK_THROWS_AS(synthesize_lowrank({6, 4, 5}, 0, 1), ArgumentError);
  CHECK_THROWS_AS(synthesize_lowrank({0, 4, 5}, 2, 1), ArgumentError);

  const StateDataset p = synthesize_power_like(10, 24, 3, 4);
  CHECK(p.truth.dims() == Dims3{10, 5, 24});
  CHECK(p.power_layout());
  double mean = 0.0;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t k = 0; k < 24; ++k) {
      CHECK(p.truth(i, kVmag, k) > 0.0);
      mean += p.truth(i, kVmag, k) / 240.0;
    }
  CHECK(mean == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("normalization") {
  Tensor3 X({2, 1, 4});
  const double row0[4] = {1.0, 2.0, 3.0, 6.0};
  for (std::size_t k = 0; k < 4; ++k) {
    X(0, 0, k) = row0[k];
    X(1, 0, k) = 7.0;
  }
  Mask3 m({2, 1, 4}, 1);
  m(0, 0, 3) = 0;
  m(0, 0, 2) = 0;
  const Normalized n = normalize(MaskedTensor3(X, m));
  CHECK(n.state.mean(0, 0) == 1.5);
  CHECK(n.state.mean(1, 0) == 7.0);
  CHECK(n.tensor.data()(1, 0, 2) == 0.0);
  CHECK(n.tensor.data()(0, 0, 1) == 0.5);
  CHECK(n.warnings.empty());
  CHECK(denormalize(n.tensor.data(), n.state)(0, 0, 1) == 2.0);

  const Normalized full = normalize(MaskedTensor3::fully_observed(X));
  CHECK(relative_error(X, denormalize(full.tensor.data(), full.state)) <= 1e-15);

  Mask3 none({2, 1, 4}, 1);
  for (std::size_t k = 0; k < 4; ++k) none(1, 0, k) = 0;
  const Normalized holes = normalize(MaskedTensor3(X, none));
  CHECK(holes.state.mean(1, 0) == 0.0);
  CHECK(holes.warnings.size() == 1);
}
