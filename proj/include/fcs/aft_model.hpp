#ifndef FCS_AFT_MODEL_HPP
#define FCS_AFT_MODEL_HPP

#include <string>
#include <utility>

#include "fcs/error.hpp"
#include "fcs/linalg.hpp"

namespace fcs {

/// Predictors of the linear AFT model: FPC score columns followed by scalar
/// covariate columns. The intercept is implicit.
class FaftDesign {
 public:
  FaftDesign() = default;
  explicit FaftDesign(Matrix scores, Matrix covariates = Matrix())
      : num_scores_(scores.cols()) {
    const Index n = scores.rows();
    if (covariates.size() == 0) covariates.resize(n, 0);
    if (covariates.rows() != n) {
      throw InvalidArgument("design: scores and covariates have different row counts");
    }
    x_.resize(n, scores.cols() + covariates.cols());
    x_ << scores, covariates;
    if (!x_.allFinite()) throw InvalidArgument("design contains non-finite entries");
  }

  const Matrix& matrix() const { return x_; }
  Index rows() const { return x_.rows(); }
  Index cols() const { return x_.cols(); }
  Index num_scores() const { return num_scores_; }
  Index num_covariates() const { return x_.cols() - num_scores_; }

  FaftDesign subset(const std::vector<Index>& rows) const {
    Matrix sub = linalg::select_rows(x_, rows);
    return FaftDesign(sub.leftCols(num_scores_), sub.rightCols(num_covariates()));
  }

 private:
  Matrix x_;
  Index num_scores_ = 0;
};

/// theta = (alpha, beta_1..beta_K, gamma_1..gamma_p).
struct FaftParams {
  double alpha = 0.0;
  Vector beta_scores;
  Vector gamma;

  static FaftParams zeros(Index k, Index p) {
    FaftParams t;
    t.beta_scores = Vector::Zero(k);
    t.gamma = Vector::Zero(p);
    return t;
  }

  static FaftParams from_slopes(double alpha, const Vector& slopes, Index k) {
    FaftParams t;
    t.alpha = alpha;
    t.beta_scores = slopes.head(k);
    t.gamma = slopes.tail(slopes.size() - k);
    return t;
  }

  Vector slopes() const {
    Vector s(beta_scores.size() + gamma.size());
    s << beta_scores, gamma;
    return s;
  }

  /// (alpha, slopes) stacked into one vector.
  Vector stacked() const {
    Vector s(1 + beta_scores.size() + gamma.size());
    s << alpha, beta_scores, gamma;
    return s;
  }

  static FaftParams from_stacked(const Vector& v, Index k) {
    return from_slopes(v(0), v.tail(v.size() - 1), k);
  }

  void check_matches(const FaftDesign& d) const {
    if (beta_scores.size() != d.num_scores() || gamma.size() != d.num_covariates()) {
      throw InvalidArgument("parameter dimensions (" + std::to_string(beta_scores.size()) +
                            "+" + std::to_string(gamma.size()) +
                            ") do not match design columns (" +
                            std::to_string(d.num_scores()) + "+" +
                            std::to_string(d.num_covariates()) + ")");
    }
  }

  /// alpha + theta^T D_i for every row.
  Vector linear_predictor(const FaftDesign& d) const {
    check_matches(d);
    Vector eta = d.matrix() * slopes();
    eta.array() += alpha;
    return eta;
  }
};

}  // namespace fcs

#endif  // FCS_AFT_MODEL_HPP
