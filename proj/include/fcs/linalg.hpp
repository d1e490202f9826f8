#ifndef FCS_LINALG_HPP
#define FCS_LINALG_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fcs/error.hpp"

namespace fcs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

namespace linalg {

/// Symmetric inverse square root S^{-1/2} via eigendecomposition.
/// Throws DataError if the smallest eigenvalue is not above `floor` times the
/// largest one.
inline Matrix inverse_sqrt_spd(const Matrix& s, double floor = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) throw DataError("eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (!(ev.minCoeff() > floor * std::max(top, 1e-300))) {
    throw DataError("matrix is singular or not positive definite");
  }
  return es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

inline double min_eigenvalue(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Column means of an n x q matrix.
inline Vector column_means(const Matrix& x) {
  return x.colwise().mean().transpose();
}

/// Sample standard deviation (divisor n - 1); 0 for fewer than two values.
inline double sample_sd(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / double(v.size() - 1));
}

/// Median of a copy of the values (average of the two middle values for even
/// counts).
inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

/// Linear-interpolation quantile (type 7), p in [0, 1].
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double h = p * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

inline Matrix select_rows(const Matrix& x, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Index(i)) = x.row(rows[i]);
  return out;
}

inline Vector select_rows(const Vector& x, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(Index(i)) = x(rows[i]);
  return out;
}

inline IntVector select_rows(const IntVector& x, const std::vector<Index>& rows) {
  IntVector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(Index(i)) = x(rows[i]);
  return out;
}

inline Matrix select_cols(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(Index(j)) = x.col(cols[j]);
  return out;
}

}  // namespace linalg
}  // namespace fcs

#endif  // FCS_LINALG_HPP
