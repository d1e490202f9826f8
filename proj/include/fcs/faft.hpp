#ifndef FCS_FAFT_HPP
#define FCS_FAFT_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fcs/aft_model.hpp"
#include "fcs/error.hpp"
#include "fcs/fpca.hpp"
#include "fcs/linalg.hpp"
#include "fcs/parallel.hpp"
#include "fcs/random.hpp"
#include "fcs/survival.hpp"

namespace fcs {

/// How per-subject weights enter the least-squares update.
enum class WeightMode {
  /// Regress w_i * Y_i^Imputed on the centered design (weighted pseudo-sample).
  kScaleResponse,
  /// Weighted least squares with w_i as case weights.
  kCaseWeights,
};

struct FaftOptions {
  double tol = 1e-6;
  int max_iter = 100;
  WeightMode weight_mode = WeightMode::kScaleResponse;
};

struct FaftFit {
  FaftParams params;
  Vector beta_curve;
  int iterations = 0;
  bool converged = false;
  bool cycle_detected = false;
  double final_step_norm = 0.0;
  double residual_scale = 0.0;
  std::optional<Vector> se;
};

/// Least-squares map of a response vector onto (alpha, slopes) with the
/// centered design factorized once.
class CenteredLeastSquares {
 public:
  CenteredLeastSquares(const FaftDesign& design, const std::optional<Vector>& weights,
                       WeightMode mode)
      : num_scores_(design.num_scores()), mode_(mode) {
    const Matrix& x = design.matrix();
    const Index n = x.rows();
    if (n < 2) throw InvalidArgument("least squares needs at least 2 rows");
    if (weights) {
      if (weights->size() != n) throw InvalidArgument("weights length does not match design rows");
      if (!weights->allFinite() || weights->minCoeff() < 0.0) {
        throw InvalidArgument("weights must be finite and nonnegative");
      }
      weights_ = *weights;
    }
    const bool case_weights = weights_ && mode_ == WeightMode::kCaseWeights;
    if (case_weights) {
      const double wsum = weights_->sum();
      if (!(wsum > 0.0)) throw InvalidArgument("weights sum to zero");
      means_ = x.transpose() * (*weights_) / wsum;
    } else {
      means_ = linalg::column_means(x);
    }
    centered_ = x.rowwise() - means_.transpose();
    if (x.cols() > 0) {
      Matrix gram = case_weights ? Matrix(centered_.transpose() * weights_->asDiagonal() * centered_)
                                 : Matrix(centered_.transpose() * centered_);
      ldlt_.compute(gram);
      const double scale = gram.diagonal().cwiseAbs().maxCoeff();
      const Eigen::SelfAdjointEigenSolver<Matrix> ev(gram, Eigen::EigenvaluesOnly);
      if (ldlt_.info() != Eigen::Success || !(scale > 0.0) || !ldlt_.isPositive() ||
          !(ev.eigenvalues()(0) > 1e-12 * ev.eigenvalues()(gram.rows() - 1))) {
        throw DataError("singular Gram matrix: design columns are collinear");
      }
    }
  }

  FaftParams solve(const Vector& y) const {
    Vector resp = y;
    double resp_mean = 0.0;
    Vector rhs;
    if (weights_ && mode_ == WeightMode::kCaseWeights) {
      const Vector& w = *weights_;
      resp_mean = w.dot(resp) / w.sum();
      rhs = centered_.transpose() * (w.array() * (resp.array() - resp_mean)).matrix();
    } else {
      if (weights_) resp = weights_->cwiseProduct(resp);
      resp_mean = resp.mean();
      rhs = centered_.transpose() * (resp.array() - resp_mean).matrix();
    }
    Vector slopes = centered_.cols() > 0 ? Vector(ldlt_.solve(rhs)) : Vector(0);
    const double alpha = resp_mean - (centered_.cols() > 0 ? slopes.dot(means_) : 0.0);
    return FaftParams::from_slopes(alpha, slopes, num_scores_);
  }

 private:
  Index num_scores_;
  WeightMode mode_;
  std::optional<Vector> weights_;
  Vector means_;
  Matrix centered_;
  Eigen::LDLT<Matrix> ldlt_;
};

/// One application of the least-squares map L_n(theta): impute censored
/// outcomes at theta, then solve the centered normal equations.
inline FaftParams ls_update(const FaftParams& theta, const FaftDesign& design,
                            const SurvivalSample& sample,
                            const std::optional<Vector>& weights = std::nullopt,
                            WeightMode mode = WeightMode::kScaleResponse) {
  theta.check_matches(design);
  if (design.rows() != sample.size()) throw InvalidArgument("design and sample row counts differ");
  CenteredLeastSquares ls(design, weights, mode);
  return ls.solve(impute_outcomes(theta, design, sample));
}

namespace detail {

inline double sup_distance(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline double event_residual_sd(const FaftParams& theta, const FaftDesign& design,
                                const SurvivalSample& sample) {
  const Vector r = sample.log_time() - theta.linear_predictor(design);
  std::vector<double> ev;
  for (Index i = 0; i < r.size(); ++i) {
    if (sample.delta()(i) == 1) ev.push_back(r(i));
  }
  if (ev.size() < 2) return 0.0;
  return linalg::sample_sd(Eigen::Map<const Vector>(ev.data(), Index(ev.size())));
}

}  // namespace detail

/// Buckley-James-type iteration theta^(m) = L_n(theta^(m-1)) started from the
/// naive least-squares fit of observed log times. Stops on a sup-norm step
/// below tol, a detected cycle (returns the cycle average) or max_iter
/// (returns the iterate with the smallest step).
inline FaftFit fit_faft(const FaftDesign& design, const SurvivalSample& sample,
                        const FaftOptions& options = {},
                        const std::optional<Vector>& weights = std::nullopt) {
  if (options.max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  if (!(options.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (design.rows() != sample.size()) throw InvalidArgument("design and sample row counts differ");
  if (sample.num_events() == 0) throw DataError("all observations are censored");

  const Index k = design.num_scores();
  const CenteredLeastSquares naive(design, std::nullopt, WeightMode::kScaleResponse);
  const CenteredLeastSquares ls(design, weights, options.weight_mode);

  FaftFit fit;
  Vector current = naive.solve(sample.log_time()).stacked();
  std::vector<Vector> history{current};
  Vector best = current;
  double best_step = std::numeric_limits<double>::infinity();

  const bool uncensored = sample.num_events() == sample.size();
  for (int it = 1; it <= options.max_iter; ++it) {
    const FaftParams theta = FaftParams::from_stacked(current, k);
    const Vector y_imp =
        uncensored ? sample.log_time() : impute_from_linear_predictor(theta.linear_predictor(design), sample);
    const Vector next = ls.solve(y_imp).stacked();
    const double step = detail::sup_distance(next, current);
    fit.iterations = it;
    if (step < best_step) {
      best_step = step;
      best = next;
    }
    if (step <= options.tol) {
      fit.converged = true;
      fit.final_step_norm = step;
      current = next;
      break;
    }
    // Cycle guard: a revisit of an earlier state means the iteration will
    // repeat forever.
    bool cycled = false;
    for (std::size_t j = 0; j + 1 < history.size(); ++j) {
      if (detail::sup_distance(next, history[j]) <= options.tol) {
        Vector avg = Vector::Zero(next.size());
        for (std::size_t m = j; m < history.size(); ++m) avg += history[m];
        avg /= double(history.size() - j);
        current = avg;
        fit.cycle_detected = true;
        fit.final_step_norm = step;
        cycled = true;
        break;
      }
    }
    if (cycled) break;
    history.push_back(next);
    current = next;
    if (it == options.max_iter) {
      current = best;
      fit.final_step_norm = best_step;
    }
  }
  fit.params = FaftParams::from_stacked(current, k);
  fit.residual_scale = detail::event_residual_sd(fit.params, design, sample);
  return fit;
}

/// beta-hat(s) = sum_k beta_k phi_k(s); stored into the fit and returned.
inline Vector recover_beta(FaftFit& fit, const FpcaBasis& basis) {
  fit.beta_curve = reconstruct_curve(fit.params.beta_scores, basis);
  return fit.beta_curve;
}

/// Nonparametric pairs-bootstrap standard errors of (alpha, beta, gamma).
/// Resamples without events are redrawn up to 10 times. Weights, when given,
/// travel with their rows.
inline Vector bootstrap_se(const FaftDesign& design, const SurvivalSample& sample,
                           const FaftOptions& options, int replicates, std::uint64_t seed,
                           int threads = 1, const std::optional<Vector>& weights = std::nullopt) {
  if (replicates < 50) throw InvalidArgument("bootstrap needs at least 50 replicates");
  const Index n = sample.size();
  const Index q = 1 + design.cols();
  Matrix draws(replicates, q);
  parallel_for(std::size_t(replicates), threads, [&](std::size_t b) {
    Rng rng(derive_seed(seed, {std::uint64_t(b)}));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    bool ok = false;
    for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
      Index events = 0;
      for (auto& r : rows) {
        r = pick(rng);
        events += sample.delta()(r);
      }
      ok = events > 0;
    }
    if (!ok) throw EstimationError("bootstrap resample without events after 10 attempts");
    std::optional<Vector> w;
    if (weights) w = linalg::select_rows(*weights, rows);
    const FaftFit f = fit_faft(design.subset(rows), sample.subset(rows), options, w);
    draws.row(Index(b)) = f.params.stacked().transpose();
  });
  Vector se(q);
  for (Index j = 0; j < q; ++j) se(j) = linalg::sample_sd(draws.col(j));
  return se;
}

}  // namespace fcs

#endif  // FCS_FAFT_HPP
