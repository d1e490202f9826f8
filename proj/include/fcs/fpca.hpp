#ifndef FCS_FPCA_HPP
#define FCS_FPCA_HPP

#include <cmath>
#include <string>
#include <utility>

#include "fcs/error.hpp"
#include "fcs/linalg.hpp"

namespace fcs {

/// n curves observed on a shared, strictly increasing grid. Row i holds
/// X_i(s_1), ..., X_i(s_M).
class FunctionalSample {
 public:
  FunctionalSample() = default;
  FunctionalSample(Vector grid, Matrix values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (grid_.size() < 2) throw InvalidArgument("grid needs at least 2 points");
    if (values_.cols() != grid_.size()) {
      throw InvalidArgument("curve length " + std::to_string(values_.cols()) +
                            " does not match grid size " +
                            std::to_string(grid_.size()));
    }
    for (Index m = 0; m < grid_.size(); ++m) {
      if (!std::isfinite(grid_(m))) throw InvalidArgument("grid has non-finite entry");
      if (m > 0 && !(grid_(m) > grid_(m - 1))) {
        throw InvalidArgument("grid must be strictly increasing");
      }
    }
    if (!values_.allFinite()) throw InvalidArgument("curve values contain missing or non-finite entries");
  }

  const Vector& grid() const { return grid_; }
  const Matrix& values() const { return values_; }
  Index size() const { return values_.rows(); }
  Index grid_size() const { return grid_.size(); }

  FunctionalSample subset(const std::vector<Index>& rows) const {
    return FunctionalSample(grid_, linalg::select_rows(values_, rows));
  }

 private:
  Vector grid_;
  Matrix values_;
};

/// Trapezoidal quadrature weights on a (possibly non-uniform) grid.
inline Vector trapezoid_weights(const Vector& grid) {
  const Index m = grid.size();
  if (m < 2) throw InvalidArgument("grid needs at least 2 points");
  Vector w = Vector::Zero(m);
  for (Index j = 0; j + 1 < m; ++j) {
    const double h = grid(j + 1) - grid(j);
    w(j) += 0.5 * h;
    w(j + 1) += 0.5 * h;
  }
  return w;
}

/// Trapezoidal approximation of the L2 inner product on the grid.
inline double inner_product(const Vector& f, const Vector& g, const Vector& grid) {
  if (f.size() != grid.size() || g.size() != grid.size()) {
    throw InvalidArgument("inner_product: length mismatch");
  }
  double acc = 0.0;
  for (Index j = 0; j + 1 < grid.size(); ++j) {
    const double h = grid(j + 1) - grid(j);
    acc += 0.5 * h * (f(j) * g(j) + f(j + 1) * g(j + 1));
  }
  return acc;
}

/// Truncated empirical eigensystem of a functional sample. Eigenfunctions are
/// orthonormal in the quadrature inner product.
struct FpcaBasis {
  Vector grid;
  Vector mean_curve;
  Matrix eigenfunctions;  // M x K, column k = phi_k on the grid
  Vector eigenvalues;     // K, nonincreasing, positive
  double pve_achieved = 0.0;
  Vector quadrature_weights;
  /// All positive eigenvalues above the numerical floor (not only the
  /// retained ones); used for PVE bookkeeping and reconstruction budgets.
  Vector all_eigenvalues;

  Index num_components() const { return eigenvalues.size(); }
  Index grid_size() const { return grid.size(); }
};

struct ScoreMatrix {
  Matrix scores;        // n x K, A_ik
  Matrix standardized;  // n x K, lambda_k^{-1/2} A_ik; empty until filled

  bool has_standardized() const {
    return standardized.size() > 0 && standardized.rows() == scores.rows();
  }
};

struct FpcaResult {
  FpcaBasis basis;
  ScoreMatrix scores;
};

/// Scores of arbitrary curves (rows of `curves`) on an existing basis.
inline Matrix project_scores(const FpcaBasis& basis, const Matrix& curves) {
  if (curves.cols() != basis.grid_size()) {
    throw InvalidArgument("project_scores: curve length does not match basis grid");
  }
  Matrix centered = curves.rowwise() - basis.mean_curve.transpose();
  return centered * basis.quadrature_weights.asDiagonal() * basis.eigenfunctions;
}

namespace detail {

// Eigenfunction columns are scaled so the entry of largest magnitude is positive.
inline void fix_signs(Matrix& phi) {
  for (Index k = 0; k < phi.cols(); ++k) {
    Index arg = 0;
    phi.col(k).cwiseAbs().maxCoeff(&arg);
    if (phi(arg, k) < 0) phi.col(k) = -phi.col(k);
  }
}

}  // namespace detail

/// Estimates the truncated Karhunen-Loeve decomposition. The retained rank is
/// the smallest K whose cumulative eigenvalue fraction reaches `pve_target`.
inline FpcaResult estimate_fpca(const FunctionalSample& sample, double pve_target) {
  if (!(pve_target > 0.0 && pve_target <= 1.0)) {
    throw InvalidArgument("pve_target must lie in (0, 1]");
  }
  const Index n = sample.size();
  const Index m = sample.grid_size();
  if (n < 2) throw InvalidArgument("estimate_fpca needs at least 2 curves");

  FpcaResult out;
  FpcaBasis& basis = out.basis;
  basis.grid = sample.grid();
  basis.quadrature_weights = trapezoid_weights(sample.grid());
  basis.mean_curve = linalg::column_means(sample.values());

  const Vector sqrt_w = basis.quadrature_weights.cwiseSqrt();
  // Rows: (X_i - mean) W^{1/2}; covariance operator W^{1/2} C W^{1/2}.
  Matrix xt = (sample.values().rowwise() - basis.mean_curve.transpose()) *
              sqrt_w.asDiagonal();
  if (xt.cwiseAbs().maxCoeff() == 0.0) throw DataError("degenerate sample");

  Vector evals;
  Matrix evecs;  // M x r, orthonormal in Euclidean metric
  if (m <= n) {
    Matrix cov = (xt.transpose() * xt) / double(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
    evals = es.eigenvalues().reverse();
    evecs = es.eigenvectors().rowwise().reverse();
  } else {
    // Gram route for wide samples: shares the nonzero spectrum with the
    // M x M operator.
    Matrix gram = (xt * xt.transpose()) / double(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw DataError("gram eigendecomposition failed");
    evals = es.eigenvalues().reverse();
    Matrix v = es.eigenvectors().rowwise().reverse();
    evecs.resize(m, n);
    for (Index k = 0; k < n; ++k) {
      if (evals(k) > 0) {
        evecs.col(k) = xt.transpose() * v.col(k) / std::sqrt(double(n) * evals(k));
      } else {
        evecs.col(k).setZero();
      }
    }
  }

  const double top = evals(0);
  if (!(top > 0.0)) throw DataError("degenerate sample");
  Index eligible = 0;
  while (eligible < evals.size() && evals(eligible) > 1e-10 * top) ++eligible;

  double total = 0.0;
  for (Index k = 0; k < eligible; ++k) total += evals(k);
  Index keep = eligible;
  double cum = 0.0;
  for (Index k = 0; k < eligible; ++k) {
    cum += evals(k);
    if (cum >= pve_target * total * (1.0 - 1e-12)) {
      keep = k + 1;
      break;
    }
  }
  double achieved = 0.0;
  for (Index k = 0; k < keep; ++k) achieved += evals(k);
  basis.pve_achieved = achieved / total;
  basis.all_eigenvalues = evals.head(eligible);
  basis.eigenvalues = evals.head(keep);
  basis.eigenfunctions = sqrt_w.cwiseInverse().asDiagonal() * evecs.leftCols(keep);
  detail::fix_signs(basis.eigenfunctions);

  out.scores.scores = project_scores(basis, sample.values());
  return out;
}

/// Fills `standardized` with lambda_k^{-1/2} A_ik, recomputed from the raw
/// scores so repeated calls give the same result.
inline ScoreMatrix standardize_scores(ScoreMatrix scores, const FpcaBasis& basis) {
  if (scores.scores.cols() != basis.num_components()) {
    throw InvalidArgument("standardize_scores: score columns do not match basis rank");
  }
  if (!(basis.eigenvalues.size() == 0 || basis.eigenvalues.minCoeff() > 0.0)) {
    throw InvalidArgument("standardize_scores: zero eigenvalue");
  }
  scores.standardized =
      scores.scores * basis.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
  return scores;
}

struct StandardizedCovariates {
  Matrix z_star;   // n x p, rows Gamma_Z^{-1/2} Z_i
  Matrix gamma_z;  // p x p sample second-moment matrix (1/n) Z^T Z
  Matrix inv_sqrt;
};

/// Whitens covariates by the symmetric inverse square root of their sample
/// second-moment matrix.
inline StandardizedCovariates standardize_covariates(const Matrix& z) {
  const Index n = z.rows();
  const Index p = z.cols();
  if (!(n > p)) throw InvalidArgument("standardize_covariates needs n > p");
  StandardizedCovariates out;
  out.gamma_z = (z.transpose() * z) / double(n);
  try {
    out.inv_sqrt = linalg::inverse_sqrt_spd(out.gamma_z, 1e-10);
  } catch (const DataError&) {
    throw DataError("singular covariate second-moment matrix (collinear covariates)");
  }
  out.z_star = z * out.inv_sqrt;
  return out;
}

/// Evaluates sum_k coeffs_k phi_k on the grid.
inline Vector reconstruct_curve(const Vector& coeffs, const FpcaBasis& basis) {
  if (coeffs.size() != basis.num_components()) {
    throw InvalidArgument("reconstruct_curve: expected " +
                          std::to_string(basis.num_components()) + " coefficients, got " +
                          std::to_string(coeffs.size()));
  }
  return basis.eigenfunctions * coeffs;
}

}  // namespace fcs

#endif  // FCS_FPCA_HPP
