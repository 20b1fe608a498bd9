#include "dtc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <locale>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

namespace dtc {

bool StateDataset::power_layout() const {
  if (truth.dims().J != kMeasurementTypes.size()) return false;
  if (labels.measurements.empty()) return true;
  for (std::size_t j = 0; j < kMeasurementTypes.size(); ++j) {
    if (labels.measurements[j] != kMeasurementTypes[j]) return false;
  }
  return true;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) return std::nullopt;
  return v;
}

std::optional<double> parse_value(std::string_view s) {
  if (s.empty()) return std::nullopt;
  const std::string copy(s);
  std::istringstream is(copy);
  is.imbue(std::locale::classic());
  double v = 0.0;
  is >> v;
  if (is.fail() || !is.eof() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct Cell {
  std::size_t phase;
  std::size_t measurement;
  std::size_t time;
  double value;
};

}  // namespace

StateDataset parse_dataset(std::istream& in) {
  std::string text;
  std::size_t line = 0;
  bool header = false;
  bool named = false, numbered = false;
  std::map<std::string, std::size_t> phase_ids;
  std::vector<std::string> phase_names;
  std::vector<Cell> cells;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> seen;
  std::size_t J = 0, K = 0;
  while (std::getline(in, text)) {
    ++line;
    const std::string_view row = trim(text);
    if (row.empty() || row.front() == '#') continue;
    const auto fields = split_csv(row);
    if (!header) {
      if (fields.size() != 4 || fields[0] != "phase_id" || fields[1] != "measurement_type" ||
          fields[2] != "time_index" || fields[3] != "value") {
        throw ParseError("expected header phase_id,measurement_type,time_index,value", line);
      }
      header = true;
      continue;
    }
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), line);
    }
    if (fields[0].empty()) throw ParseError("empty phase_id", line);
    std::size_t meas = 0;
    bool found = false;
    for (std::size_t j = 0; j < kMeasurementTypes.size(); ++j) {
      if (fields[1] == kMeasurementTypes[j]) {
        meas = j;
        found = true;
        named = true;
      }
    }
    if (!found) {
      const auto idx = parse_index(fields[1]);
      if (!idx) throw ParseError("unknown measurement_type '" + std::string(fields[1]) + "'", line);
      meas = *idx - 1;
      numbered = true;
    }
    if (named && numbered) {
      throw ParseError("measurement_type mixes names and numeric indices", line);
    }
    const auto time = parse_index(fields[2]);
    if (!time) throw ParseError("time_index must be a positive integer", line);
    const auto value = parse_value(fields[3]);
    if (!value) throw ParseError("value is not a finite number", line);
    const std::string pid(fields[0]);
    auto [it, inserted] = phase_ids.emplace(pid, phase_names.size());
    if (inserted) phase_names.push_back(pid);
    const auto key = std::make_tuple(it->second, meas, *time - 1);
    if (auto [prev, fresh] = seen.emplace(key, line); !fresh) {
      throw ParseError("duplicate cell (" + pid + ", " + std::string(fields[1]) + ", " +
                           std::string(fields[2]) + "), first given on line " +
                           std::to_string(prev->second),
                       line);
    }
    cells.push_back({it->second, meas, *time - 1, *value});
    J = std::max(J, meas + 1);
    K = std::max(K, *time);
  }
  if (!header) throw ParseError("missing header", 0);
  if (cells.empty()) throw ParseError("dataset has no rows", line);
  if (named) J = kMeasurementTypes.size();
  const Dims3 dims{phase_names.size(), J, K};
  if (cells.size() != dims.size()) {
    Mask3 have(dims, 0);
    for (const auto& c : cells) have(c.phase, c.measurement, c.time) = 1;
    for (std::size_t i = 0; i < dims.I; ++i)
      for (std::size_t j = 0; j < dims.J; ++j)
        for (std::size_t k = 0; k < dims.K; ++k)
          if (!have(i, j, k)) {
            const std::string m = named ? std::string(kMeasurementTypes[j]) : std::to_string(j + 1);
            throw ParseError("missing cell (" + phase_names[i] + ", " + m + ", " +
                                 std::to_string(k + 1) + "); " +
                                 std::to_string(dims.size() - cells.size()) + " cell(s) missing",
                             0);
          }
  }
  StateDataset d;
  d.truth = Tensor3(dims);
  for (const auto& c : cells) d.truth(c.phase, c.measurement, c.time) = c.value;
  d.labels.phases = std::move(phase_names);
  for (std::size_t j = 0; j < J; ++j) {
    d.labels.measurements.push_back(named ? std::string(kMeasurementTypes[j]) : std::to_string(j + 1));
  }
  for (std::size_t k = 0; k < K; ++k) d.labels.times.push_back(std::to_string(k + 1));
  return d;
}

StateDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path.string() + "'", 0);
  return parse_dataset(in);
}

void write_dataset(std::ostream& out, const StateDataset& d) {
  const Dims3& dims = d.truth.dims();
  const bool power = d.power_layout();
  out << "phase_id,measurement_type,time_index,value\n";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  for (std::size_t i = 0; i < dims.I; ++i) {
    const std::string pid =
        i < d.labels.phases.size() ? d.labels.phases[i] : std::to_string(i + 1);
    for (std::size_t j = 0; j < dims.J; ++j) {
      const std::string m = power ? std::string(kMeasurementTypes[j]) : std::to_string(j + 1);
      for (std::size_t k = 0; k < dims.K; ++k) {
        os << pid << ',' << m << ',' << k + 1 << ',' << d.truth(i, j, k) << '\n';
      }
    }
  }
  out << os.str();
}

namespace {

void fill_gaussian(Matrix& M, std::mt19937_64& rng, double mean, double stddev) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < M.cols(); ++c)
    for (Eigen::Index r = 0; r < M.rows(); ++r) M(r, c) = mean + stddev * normal(rng);
}

StateDataset from_factors(FactorTriple f) {
  StateDataset d;
  d.truth = reconstruct(f);
  const Dims3 dims = f.dims();
  for (std::size_t i = 0; i < dims.I; ++i) d.labels.phases.push_back(std::to_string(i + 1));
  for (std::size_t j = 0; j < dims.J; ++j) d.labels.measurements.push_back(std::to_string(j + 1));
  for (std::size_t k = 0; k < dims.K; ++k) d.labels.times.push_back(std::to_string(k + 1));
  d.factors = std::move(f);
  return d;
}

}  // namespace

StateDataset synthesize_lowrank(const Dims3& dims, std::size_t rank, std::uint64_t seed,
                                double factor_scale) {
  if (rank == 0) throw ArgumentError("rank must be at least 1");
  if (dims.size() == 0) throw ArgumentError("tensor shape " + to_string(dims) + " is empty");
  if (!(factor_scale > 0.0)) throw ArgumentError("factor_scale must be positive");
  std::mt19937_64 rng(seed);
  const auto F = static_cast<Eigen::Index>(rank);
  Matrix A(static_cast<Eigen::Index>(dims.I), F), B(static_cast<Eigen::Index>(dims.J), F),
      C(static_cast<Eigen::Index>(dims.K), F);
  fill_gaussian(A, rng, 0.0, factor_scale);
  fill_gaussian(B, rng, 0.0, factor_scale);
  fill_gaussian(C, rng, 0.0, factor_scale);
  return from_factors(FactorTriple(std::move(A), std::move(B), std::move(C)));
}

StateDataset synthesize_power_like(std::size_t phases, std::size_t times, std::size_t rank,
                                   std::uint64_t seed) {
  if (rank == 0) throw ArgumentError("rank must be at least 1");
  if (phases == 0 || times == 0) throw ArgumentError("phases and times must be positive");
  std::mt19937_64 rng(seed);
  const auto F = static_cast<Eigen::Index>(rank);
  const auto I = static_cast<Eigen::Index>(phases), K = static_cast<Eigen::Index>(times);
  Matrix A(I, F), B(5, F), C(K, F);
  fill_gaussian(A, rng, 0.0, 1.0);
  fill_gaussian(B, rng, 0.0, 0.05);
  fill_gaussian(C, rng, 0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < I; ++i) A(i, 0) = 1.0 + 0.05 * normal(rng);
  for (Eigen::Index k = 0; k < K; ++k) C(k, 0) = 1.0 + 0.05 * normal(rng);
  B.col(0) << 0.9, -0.3, 1.0, 0.4, 0.15;
  StateDataset d = from_factors(FactorTriple(std::move(A), std::move(B), std::move(C)));
  d.labels.measurements.assign(kMeasurementTypes.begin(), kMeasurementTypes.end());
  return d;
}

Normalized normalize(const MaskedTensor3& t) {
  const Dims3& d = t.dims();
  Normalized out;
  out.state.mean = Matrix::Zero(static_cast<Eigen::Index>(d.I), static_cast<Eigen::Index>(d.J));
  for (std::size_t i = 0; i < d.I; ++i) {
    for (std::size_t j = 0; j < d.J; ++j) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < d.K; ++k) {
        if (!t.observed(i, j, k)) continue;
        sum += t.data()(i, j, k);
        ++count;
      }
      if (count == 0) {
        out.warnings.push_back("phase " + std::to_string(i + 1) + ", measurement " +
                               std::to_string(j + 1) + " has no observed entry; mean set to 0");
        continue;
      }
      out.state.mean(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sum / static_cast<double>(count);
    }
  }
  Tensor3 data = t.data();
  for (std::size_t i = 0; i < d.I; ++i)
    for (std::size_t j = 0; j < d.J; ++j) {
      const double m = out.state.mean(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (std::size_t k = 0; k < d.K; ++k) data(i, j, k) -= m;
    }
  out.tensor = MaskedTensor3(std::move(data), t.mask(), t.labels());
  return out;
}

Tensor3 denormalize(const Tensor3& t, const NormalizationState& s) {
  const Dims3& d = t.dims();
  if (s.mean.rows() != static_cast<Eigen::Index>(d.I) ||
      s.mean.cols() != static_cast<Eigen::Index>(d.J)) {
    throw DimensionError("normalization state does not match tensor " + to_string(d));
  }
  Tensor3 out = t;
  for (std::size_t i = 0; i < d.I; ++i)
    for (std::size_t j = 0; j < d.J; ++j) {
      const double m = s.mean(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (std::size_t k = 0; k < d.K; ++k) out(i, j, k) += m;
    }
  return out;
}

}  // namespace dtc
