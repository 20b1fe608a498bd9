#pragma once

// Dense three-way tensors, observation masks and CPD algebra.
//
// Storage is row-contiguous: entry (i, j, k) of an I x J x K array lives at
// offset (i * J + j) * K + k. Matrices are Eigen column-major, so vec(M) is
// the natural memory order of M.
//
// Unfolding convention, for X = [[A, B, C]]:
//   X^(1) = A (C kr B)^T    column index k * J + j
//   X^(2) = B (C kr A)^T    column index k * I + i
//   X^(3) = C (B kr A)^T    column index j * I + i
// where kr is the Khatri-Rao product. With this choice
// vec(X^(1)) = ((C kr B) kron I_I) vec(A) holds identically.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dtc/errors.hpp"

namespace dtc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Dims3 {
  std::size_t I = 0;
  std::size_t J = 0;
  std::size_t K = 0;

  std::size_t size() const noexcept { return I * J * K; }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

std::string to_string(const Dims3& dims);

template <typename T>
class Array3 {
 public:
  Array3() = default;
  explicit Array3(Dims3 dims, T fill = T{})
      : dims_(dims), values_(dims.size(), fill) {}

  const Dims3& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return (i * dims_.J + j) * dims_.K + k;
  }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return values_[offset(i, j, k)];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return values_[offset(i, j, k)];
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  friend bool operator==(const Array3&, const Array3&) = default;

 private:
  Dims3 dims_;
  std::vector<T> values_;
};

using Tensor3 = Array3<double>;
using Mask3 = Array3<std::uint8_t>;

/// Optional per-axis names (phase ids, measurement types, time stamps).
struct AxisLabels {
  std::vector<std::string> phases;
  std::vector<std::string> measurements;
  std::vector<std::string> times;
};

/// A data tensor paired with a binary observation mask (1 = observed).
class MaskedTensor3 {
 public:
  MaskedTensor3() = default;
  /// Throws DimensionError on shape mismatch, ArgumentError on mask values
  /// other than 0 or 1.
  MaskedTensor3(Tensor3 data, Mask3 mask, std::optional<AxisLabels> labels = {});

  /// Fully observed tensor.
  static MaskedTensor3 fully_observed(Tensor3 data);

  const Dims3& dims() const noexcept { return data_.dims(); }
  const Tensor3& data() const noexcept { return data_; }
  const Mask3& mask() const noexcept { return mask_; }
  const std::optional<AxisLabels>& labels() const noexcept { return labels_; }

  bool observed(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return mask_(i, j, k) != 0;
  }
  std::size_t observed_count() const noexcept;

  /// W * X: unobserved entries replaced by zero.
  Tensor3 masked_data() const;

  /// Same data and labels under a replacement mask.
  MaskedTensor3 with_mask(Mask3 mask) const;

  /// Horizontal sub-tensor over the listed phases, in the listed order.
  MaskedTensor3 select_phases(std::span<const std::size_t> phases) const;

 private:
  Tensor3 data_;
  Mask3 mask_;
  std::optional<AxisLabels> labels_;
};

/// CPD factors A (I x F), B (J x F), C (K x F).
struct FactorTriple {
  Matrix A;
  Matrix B;
  Matrix C;

  FactorTriple() = default;
  /// Throws DimensionError unless all three have the same, positive column count.
  FactorTriple(Matrix a, Matrix b, Matrix c);

  std::size_t rank() const noexcept { return static_cast<std::size_t>(A.cols()); }
  Dims3 dims() const noexcept {
    return {static_cast<std::size_t>(A.rows()), static_cast<std::size_t>(B.rows()),
            static_cast<std::size_t>(C.rows())};
  }
};

/// Column-wise Kronecker product: column f is kron(M_f, N_f).
Matrix khatri_rao(const Matrix& M, const Matrix& N);

/// Block (i, j) of the result is M(i, j) * N.
Matrix kronecker(const Matrix& M, const Matrix& N);

/// Mode-n unfolding of data and mask (mode in {1, 2, 3}).
std::pair<Matrix, Matrix> mode_unfold(const MaskedTensor3& t, int mode);

/// Mode-n unfolding of a dense tensor.
Matrix unfold(const Tensor3& t, int mode);

/// Entry (i, j, k) = sum_f A(i, f) B(j, f) C(k, f).
Tensor3 reconstruct(const FactorTriple& f);

double frobenius_norm(const Tensor3& t);
double frobenius_norm_sq(const Tensor3& t);

/// (1/2) || W * (X - [[A, B, C]]) ||_F^2.
double masked_objective(const MaskedTensor3& t, const FactorTriple& f);

/// ||X - Y||_F / ||X||_F.
double relative_error(const Tensor3& truth, const Tensor3& estimate);

}  // namespace dtc
