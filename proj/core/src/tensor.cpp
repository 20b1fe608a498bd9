#include "dtc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dtc {

std::string to_string(const Dims3& dims) {
  std::ostringstream os;
  os << dims.I << "x" << dims.J << "x" << dims.K;
  return os.str();
}

MaskedTensor3::MaskedTensor3(Tensor3 data, Mask3 mask, std::optional<AxisLabels> labels)
    : data_(std::move(data)), mask_(std::move(mask)), labels_(std::move(labels)) {
  if (!(data_.dims() == mask_.dims())) {
    throw DimensionError("data is " + to_string(data_.dims()) + " but mask is " +
                         to_string(mask_.dims()));
  }
  const auto bad = std::find_if(mask_.values().begin(), mask_.values().end(),
                                [](std::uint8_t w) { return w > 1; });
  if (bad != mask_.values().end()) {
    throw ArgumentError("mask entries must be 0 or 1");
  }
}

MaskedTensor3 MaskedTensor3::fully_observed(Tensor3 data) {
  Mask3 mask(data.dims(), 1);
  return MaskedTensor3(std::move(data), std::move(mask));
}

std::size_t MaskedTensor3::observed_count() const noexcept {
  return static_cast<std::size_t>(
      std::count(mask_.values().begin(), mask_.values().end(), std::uint8_t{1}));
}

Tensor3 MaskedTensor3::masked_data() const {
  Tensor3 out(dims());
  auto src = data_.values();
  auto w = mask_.values();
  auto dst = out.values();
  for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = w[n] ? src[n] : 0.0;
  return out;
}

MaskedTensor3 MaskedTensor3::with_mask(Mask3 mask) const {
  return MaskedTensor3(data_, std::move(mask), labels_);
}

MaskedTensor3 MaskedTensor3::select_phases(std::span<const std::size_t> phases) const {
  const Dims3 d = dims();
  const Dims3 sub{phases.size(), d.J, d.K};
  Tensor3 data(sub);
  Mask3 mask(sub);
  for (std::size_t r = 0; r < phases.size(); ++r) {
    const std::size_t i = phases[r];
    if (i >= d.I) throw ArgumentError("phase index " + std::to_string(i) + " out of range");
    for (std::size_t j = 0; j < d.J; ++j) {
      for (std::size_t k = 0; k < d.K; ++k) {
        data(r, j, k) = data_(i, j, k);
        mask(r, j, k) = mask_(i, j, k);
      }
    }
  }
  std::optional<AxisLabels> labels;
  if (labels_) {
    labels = AxisLabels{{}, labels_->measurements, labels_->times};
    if (!labels_->phases.empty()) {
      for (std::size_t i : phases) labels->phases.push_back(labels_->phases[i]);
    }
  }
  return MaskedTensor3(std::move(data), std::move(mask), std::move(labels));
}

FactorTriple::FactorTriple(Matrix a, Matrix b, Matrix c)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)) {
  if (A.cols() == 0 || A.cols() != B.cols() || A.cols() != C.cols()) {
    throw DimensionError("factor column counts differ or are zero: " +
                         std::to_string(A.cols()) + ", " + std::to_string(B.cols()) +
                         ", " + std::to_string(C.cols()));
  }
}

Matrix khatri_rao(const Matrix& M, const Matrix& N) {
  if (M.cols() != N.cols()) {
    throw DimensionError("khatri_rao: column counts " + std::to_string(M.cols()) +
                         " and " + std::to_string(N.cols()) + " differ");
  }
  const Eigen::Index p = N.rows();
  Matrix out(M.rows() * p, M.cols());
  for (Eigen::Index f = 0; f < M.cols(); ++f) {
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      out.col(f).segment(r * p, p) = M(r, f) * N.col(f);
    }
  }
  return out;
}

Matrix kronecker(const Matrix& M, const Matrix& N) {
  const Eigen::Index p = N.rows();
  const Eigen::Index q = N.cols();
  Matrix out(M.rows() * p, M.cols() * q);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      out.block(i * p, j * q, p, q) = M(i, j) * N;
    }
  }
  return out;
}

namespace {

template <typename T, typename Get>
Matrix unfold_impl(const Dims3& d, int mode, Get get) {
  Matrix out;
  switch (mode) {
    case 1:
      out.resize(d.I, d.J * d.K);
      for (std::size_t i = 0; i < d.I; ++i)
        for (std::size_t j = 0; j < d.J; ++j)
          for (std::size_t k = 0; k < d.K; ++k) out(i, k * d.J + j) = get(i, j, k);
      break;
    case 2:
      out.resize(d.J, d.I * d.K);
      for (std::size_t i = 0; i < d.I; ++i)
        for (std::size_t j = 0; j < d.J; ++j)
          for (std::size_t k = 0; k < d.K; ++k) out(j, k * d.I + i) = get(i, j, k);
      break;
    case 3:
      out.resize(d.K, d.I * d.J);
      for (std::size_t i = 0; i < d.I; ++i)
        for (std::size_t j = 0; j < d.J; ++j)
          for (std::size_t k = 0; k < d.K; ++k) out(k, j * d.I + i) = get(i, j, k);
      break;
    default:
      throw ArgumentError("unfolding mode must be 1, 2 or 3, got " + std::to_string(mode));
  }
  return out;
}

}  // namespace

Matrix unfold(const Tensor3& t, int mode) {
  return unfold_impl<double>(t.dims(), mode,
                             [&](std::size_t i, std::size_t j, std::size_t k) { return t(i, j, k); });
}

std::pair<Matrix, Matrix> mode_unfold(const MaskedTensor3& t, int mode) {
  const auto& w = t.mask();
  Matrix data = unfold(t.data(), mode);
  Matrix mask = unfold_impl<double>(t.dims(), mode, [&](std::size_t i, std::size_t j, std::size_t k) {
    return static_cast<double>(w(i, j, k));
  });
  return {std::move(data), std::move(mask)};
}

Tensor3 reconstruct(const FactorTriple& f) {
  const Dims3 d = f.dims();
  const Eigen::Index F = f.A.cols();
  Tensor3 out(d);
  Vector ab(F);
  for (std::size_t i = 0; i < d.I; ++i) {
    for (std::size_t j = 0; j < d.J; ++j) {
      ab = f.A.row(i).cwiseProduct(f.B.row(j)).transpose();
      for (std::size_t k = 0; k < d.K; ++k) out(i, j, k) = f.C.row(k).dot(ab);
    }
  }
  return out;
}

double frobenius_norm_sq(const Tensor3& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return s;
}

double frobenius_norm(const Tensor3& t) { return std::sqrt(frobenius_norm_sq(t)); }

double masked_objective(const MaskedTensor3& t, const FactorTriple& f) {
  if (!(t.dims() == f.dims())) {
    throw DimensionError("tensor is " + to_string(t.dims()) + " but factors give " +
                         to_string(f.dims()));
  }
  const Tensor3 model = reconstruct(f);
  auto x = t.data().values();
  auto w = t.mask().values();
  auto m = model.values();
  double s = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (w[n]) {
      const double r = x[n] - m[n];
      s += r * r;
    }
  }
  return 0.5 * s;
}

double relative_error(const Tensor3& truth, const Tensor3& estimate) {
  if (!(truth.dims() == estimate.dims())) {
    throw DimensionError("relative_error: shapes differ");
  }
  auto x = truth.values();
  auto y = estimate.values();
  double num = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) num += (x[n] - y[n]) * (x[n] - y[n]);
  const double den = frobenius_norm_sq(truth);
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace dtc
