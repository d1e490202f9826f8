#ifndef FCS_WEIGHTS_HPP
#define FCS_WEIGHTS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fcs/bfgs.hpp"
#include "fcs/error.hpp"
#include "fcs/linalg.hpp"

namespace fcs {

enum class CovariateKind { kContinuous, kBinary };

enum class WeightMethod { kUnit, kParametric, kNonparametric, kFixed };

inline const char* to_string(WeightMethod m) {
  switch (m) {
    case WeightMethod::kUnit: return "unit";
    case WeightMethod::kParametric: return "parametric";
    case WeightMethod::kNonparametric: return "nonparametric";
    case WeightMethod::kFixed: return "fixed";
  }
  return "unknown";
}

/// Weighted balance between FPC scores (rows of a_star) and covariates.
struct BalanceReport {
  Matrix cross_moment;  // K x p, (1/n) sum_i w_i A*_i Z*_i^T
  Matrix implied_corr;  // K x p, |cross_moment| over unweighted RMS scales
  Matrix abs_corr;      // K x p weighted |Pearson| or |point-biserial|
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> degenerate;  // K x p
  std::vector<CovariateKind> kinds;
  double max_abs_corr = 0.0;       // max of implied_corr
  double max_weighted_corr = 0.0;  // max of abs_corr

  bool any_degenerate() const { return degenerate.size() > 0 && degenerate.any(); }
};

struct ParametricWeightModel {
  Matrix xi;     // p x K regression of A* on Z*
  Matrix sigma;  // K x K pooled residual covariance
};

struct WeightSet {
  Vector weights;  // positive, mean 1
  WeightMethod method = WeightMethod::kUnit;
  double rho = 0.0;
  Matrix gamma_slack;  // K x p achieved imbalance (nonparametric)
  BalanceReport diagnostics;
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;  // sum log w - |Gamma|^2 / (2 rho) (nonparametric)
  Vector dual;             // (lambda, mu) multipliers (nonparametric)
  double eta = 0.0;        // normalization multiplier (nonparametric)

  double min() const { return weights.minCoeff(); }
  double max() const { return weights.maxCoeff(); }
  /// Kish effective sample size.
  double effective_sample_size() const {
    return weights.sum() * weights.sum() / weights.squaredNorm();
  }
};

enum class RhoPreset { kDefault, kLoose, kTight };

/// Balancing tolerance presets: 0.1/n (default), 1/n (loose), 0.01/n (tight).
inline double rho_preset(RhoPreset preset, Index n) {
  switch (preset) {
    case RhoPreset::kLoose: return 1.0 / double(n);
    case RhoPreset::kTight: return 0.01 / double(n);
    case RhoPreset::kDefault: break;
  }
  return 0.1 / double(n);
}

namespace detail {

struct WeightedMoments {
  double mean = 0.0;
  double var = 0.0;
};

inline WeightedMoments weighted_moments(const Vector& w, const Vector& x, double wsum) {
  WeightedMoments m;
  m.mean = w.dot(x) / wsum;
  m.var = (w.array() * (x.array() - m.mean).square()).sum() / wsum;
  return m;
}

inline bool zero_variance(const WeightedMoments& m, const Vector& x) {
  const double scale = x.cwiseAbs().maxCoeff();
  return !(m.var > 1e-24 * std::max(scale * scale, 1e-300));
}

}  // namespace detail

/// Weighted |Pearson| (continuous) or |point-biserial| (binary) correlation
/// for every (FPC, covariate) pair, plus the weighted cross-moment matrix and
/// the correlations it implies on the unweighted scale of each column (equal
/// to the cross-moment itself for standardized inputs). Pairs involving a
/// zero-variance column report 0 and are flagged.
inline BalanceReport balance_diagnostics(const Vector& weights, const Matrix& a_star,
                                         const Matrix& z_star,
                                         std::vector<CovariateKind> kinds = {}) {
  const Index n = a_star.rows();
  if (weights.size() != n || z_star.rows() != n) {
    throw InvalidArgument("balance_diagnostics: lengths disagree");
  }
  if (kinds.empty()) kinds.assign(std::size_t(z_star.cols()), CovariateKind::kContinuous);
  if (Index(kinds.size()) != z_star.cols()) {
    throw InvalidArgument("balance_diagnostics: one kind per covariate column required");
  }
  const Index k = a_star.cols(), p = z_star.cols();
  BalanceReport rep;
  rep.kinds = kinds;
  rep.cross_moment = a_star.transpose() * weights.asDiagonal() * z_star / double(n);
  rep.implied_corr = Matrix::Zero(k, p);
  for (Index l = 0; l < p; ++l) {
    const double sz = z_star.col(l).norm() / std::sqrt(double(n));
    for (Index j = 0; j < k; ++j) {
      const double sa = a_star.col(j).norm() / std::sqrt(double(n));
      if (sa > 0.0 && sz > 0.0) {
        rep.implied_corr(j, l) = std::min(std::abs(rep.cross_moment(j, l)) / (sa * sz), 1.0);
      }
    }
  }
  rep.abs_corr = Matrix::Zero(k, p);
  rep.degenerate.setConstant(k, p, false);
  const double wsum = weights.sum();
  if (!(wsum > 0.0)) throw InvalidArgument("balance_diagnostics: weights sum to zero");

  for (Index l = 0; l < p; ++l) {
    const Vector z = z_star.col(l);
    const auto mz = detail::weighted_moments(weights, z, wsum);
    const bool z_flat = detail::zero_variance(mz, z);
    for (Index j = 0; j < k; ++j) {
      const Vector a = a_star.col(j);
      const auto ma = detail::weighted_moments(weights, a, wsum);
      if (z_flat || detail::zero_variance(ma, a)) {
        rep.degenerate(j, l) = true;
        continue;
      }
      double r = 0.0;
      if (kinds[std::size_t(l)] == CovariateKind::kBinary) {
        // Point-biserial: group means of A split at the covariate's midpoint.
        const double cut = 0.5 * (z.minCoeff() + z.maxCoeff());
        double w1 = 0, s1 = 0, w0 = 0, s0 = 0;
        for (Index i = 0; i < n; ++i) {
          if (z(i) > cut) { w1 += weights(i); s1 += weights(i) * a(i); }
          else { w0 += weights(i); s0 += weights(i) * a(i); }
        }
        const double pr = w1 / wsum;
        r = (s1 / w1 - s0 / w0) * std::sqrt(pr * (1.0 - pr)) / std::sqrt(ma.var);
      } else {
        const double cov =
            (weights.array() * (a.array() - ma.mean) * (z.array() - mz.mean)).sum() / wsum;
        r = cov / std::sqrt(ma.var * mz.var);
      }
      rep.abs_corr(j, l) = std::min(std::abs(r), 1.0);
    }
  }
  rep.max_abs_corr = rep.implied_corr.size() > 0 ? rep.implied_corr.maxCoeff() : 0.0;
  rep.max_weighted_corr = rep.abs_corr.size() > 0 ? rep.abs_corr.maxCoeff() : 0.0;
  return rep;
}

/// Unnormalized density-ratio weights
///   det(Sigma)^{1/2} exp{ (A*-xi^T Z*)^T Sigma^{-1} (A*-xi^T Z*)/2 - A*^T A*/2 }.
/// Throws EstimationError if any weight overflows.
inline Vector density_ratio_weights(const Matrix& a_star, const Matrix& z_star,
                                    const ParametricWeightModel& model) {
  const Index n = a_star.rows(), k = a_star.cols();
  if (model.xi.rows() != z_star.cols() || model.xi.cols() != k || model.sigma.rows() != k ||
      model.sigma.cols() != k) {
    throw InvalidArgument("density_ratio_weights: model dimensions do not match data");
  }
  Eigen::LLT<Matrix> llt(model.sigma);
  if (llt.info() != Eigen::Success) throw EstimationError("singular residual covariance");
  const Matrix& l = llt.matrixL();
  double log_det_half = 0.0;
  for (Index j = 0; j < k; ++j) log_det_half += std::log(l(j, j));
  const Matrix resid = a_star - z_star * model.xi;
  // Whitened residuals L^{-1} r_i, one per column.
  const Matrix white = llt.matrixL().solve(resid.transpose());
  Vector w(n);
  double max_exp = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const double q = 0.5 * (white.col(i).squaredNorm() - a_star.row(i).squaredNorm());
    const double e = log_det_half + q;
    max_exp = std::max(max_exp, e);
    w(i) = std::exp(e);
  }
  if (!w.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite parametric weights (max exponent " << max_exp << ")";
    throw EstimationError(msg.str());
  }
  return w;
}

struct ParametricOptions {
  /// Damped Newton steps of xi on the weighted balance equation after the
  /// least-squares start; 0 keeps the least-squares model.
  int newton_steps = 1;
  double moment_tol = 1e-10;
  /// Cap weights at this quantile before normalization; disabled when <= 0.
  double clip_quantile = 0.0;
};

namespace detail {

inline Matrix residual_covariance(const Matrix& a, const Matrix& z, const Matrix& xi) {
  const Matrix r = a - z * xi;
  return r.transpose() * r / double(a.rows());
}

inline Matrix parametric_moment(const Matrix& a, const Matrix& z, const Vector& w) {
  return a.transpose() * w.asDiagonal() * z / double(a.rows());
}

inline Vector normalize_mean_one(Vector w) {
  return w * (double(w.size()) / w.sum());
}

inline Vector clip_at_quantile(Vector w, double q) {
  std::vector<double> v(w.data(), w.data() + w.size());
  const double cap = linalg::quantile(v, q);
  for (Index i = 0; i < w.size(); ++i) w(i) = std::min(w(i), cap);
  return w;
}

/// vec of the balance moment (1/n) sum w_i A*_i Z*_i^T under mean-one weights
/// at xi, with Sigma tied to xi through the pooled residual equation. Empty
/// when the weights are not computable.
inline std::optional<Vector> balance_moment_at(const Matrix& a, const Matrix& z, const Matrix& xi) {
  ParametricWeightModel m{xi, residual_covariance(a, z, xi)};
  if (!(linalg::min_eigenvalue(m.sigma) > 1e-10)) return std::nullopt;
  try {
    const Vector w = normalize_mean_one(density_ratio_weights(a, z, m));
    if (!w.allFinite()) return std::nullopt;
    const Matrix mom = parametric_moment(a, z, w);
    return Vector(Eigen::Map<const Vector>(mom.data(), mom.size()));
  } catch (const EstimationError&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Gaussian functional propensity-score weights. xi starts at least squares
/// of A* on Z* with Sigma the pooled residual covariance; damped Newton steps
/// on the weighted balance equation then move xi (Sigma following the
/// residual equation), each kept only if it shrinks the moment norm.
inline std::pair<ParametricWeightModel, WeightSet> fit_parametric_weights(
    const Matrix& a_star, const Matrix& z_star, const ParametricOptions& options = {}) {
  const Index n = a_star.rows(), k = a_star.cols(), p = z_star.cols();
  if (z_star.rows() != n) throw InvalidArgument("fit_parametric_weights: row counts differ");
  if (!(n > p + k)) throw InvalidArgument("fit_parametric_weights needs n > p + K");

  const Matrix ztz = z_star.transpose() * z_star;
  Eigen::LDLT<Matrix> ldlt(ztz);
  const Eigen::SelfAdjointEigenSolver<Matrix> zev(ztz, Eigen::EigenvaluesOnly);
  if (ldlt.info() != Eigen::Success || p == 0 ||
      !(zev.eigenvalues()(0) > 1e-12 * zev.eigenvalues()(p - 1))) {
    throw DataError("Z*^T Z* is singular");
  }
  ParametricWeightModel model;
  model.xi = ldlt.solve(z_star.transpose() * a_star);
  model.sigma = detail::residual_covariance(a_star, z_star, model.xi);
  if (!(linalg::min_eigenvalue(model.sigma) > 1e-10)) {
    throw EstimationError("singular residual covariance");
  }
  Vector w = density_ratio_weights(a_star, z_star, model);
  int iterations = 0;

  if (options.newton_steps > 0 && p > 0) {
    const Index d = k * p;
    Vector x = Eigen::Map<const Vector>(model.xi.data(), d);
    auto moment = [&](const Vector& v) {
      return detail::balance_moment_at(a_star, z_star, Eigen::Map<const Matrix>(v.data(), p, k));
    };
    std::optional<Vector> m = moment(x);
    for (int it = 0; m && it < options.newton_steps; ++it) {
      if (m->norm() <= options.moment_tol) break;
      // Central-difference Jacobian of the tied system.
      Matrix jac(d, d);
      bool ok = true;
      for (Index c = 0; c < d && ok; ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(c)));
        Vector xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        const auto mp = moment(xp), mm = moment(xm);
        if (!mp || !mm) { ok = false; break; }
        jac.col(c) = (*mp - *mm) / (2.0 * h);
      }
      if (!ok) break;
      Eigen::ColPivHouseholderQR<Matrix> qr(jac);
      if (qr.rank() < d) break;
      const Vector step = qr.solve(-*m);
      bool moved = false;
      for (double t = 1.0; t > 1e-4; t *= 0.5) {
        const Vector xt = x + t * step;
        const auto mt = moment(xt);
        if (mt && mt->norm() < m->norm()) {
          x = xt;
          m = mt;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      ++iterations;
    }
    if (iterations > 0) {
      model.xi = Eigen::Map<const Matrix>(x.data(), p, k);
      model.sigma = detail::residual_covariance(a_star, z_star, model.xi);
      w = density_ratio_weights(a_star, z_star, model);
    }
  }

  WeightSet set;
  set.method = WeightMethod::kParametric;
  set.iterations = iterations;
  if (options.clip_quantile > 0.0) w = detail::clip_at_quantile(w, options.clip_quantile);
  set.weights = detail::normalize_mean_one(w);
  set.gradient_norm = detail::parametric_moment(a_star, z_star, set.weights).norm();
  set.diagnostics = balance_diagnostics(set.weights, a_star, z_star);
  return {model, set};
}

struct NonparametricOptions {
  int max_iter = 500;
  double grad_tol = 1e-10;
};

namespace detail {

/// Normalization multiplier eta solving sum_i 1/(eta + u_i) = n. Newton from
/// a point left of the root converges monotonically (the map is convex and
/// decreasing).
inline double solve_eta(const Vector& u) {
  const double n = double(u.size());
  double eta = std::max(-u.minCoeff() + 1.0 / n, 1.0 - u.mean());
  for (int it = 0; it < 200; ++it) {
    const Vector inv = (eta + u.array()).inverse().matrix();
    const double phi = inv.sum() - n;
    if (std::abs(phi) <= 1e-14 * n) break;
    const double dphi = -inv.squaredNorm();
    const double next = eta - phi / dphi;
    if (next == eta) break;
    eta = next;
  }
  return eta;
}

/// Empirical-likelihood dual with the normalization multiplier profiled out.
/// Variables x = (lambda, mu); value and gradient are scaled by 1/n.
struct BalancingDual {
  Matrix g;  // n x (K+p): exact-balance moments (A*, Z*)
  Matrix h;  // n x (K*p): cross moments vec(A* Z*^T), index j + K*l
  double rho;

  mutable double last_eta = 1.0;

  Vector u(const Vector& x) const {
    const Index ng = g.cols();
    return g * x.head(ng) + h * x.tail(h.cols());
  }

  double operator()(const Vector& x, Vector& grad) const {
    const double n = double(g.rows());
    const Vector uu = u(x);
    const double eta = solve_eta(uu);
    last_eta = eta;
    const Eigen::ArrayXd c = eta + uu.array();
    if ((c <= 0.0).any()) return std::numeric_limits<double>::infinity();
    const Vector w = c.inverse().matrix();
    const Vector mu = x.tail(h.cols());
    grad.resize(x.size());
    grad.head(g.cols()) = -g.transpose() * w / n;
    grad.tail(h.cols()) = -h.transpose() * w / n + n * rho * mu;
    return -c.log().mean() - 1.0 + eta + 0.5 * n * rho * mu.squaredNorm();
  }

  /// Hessian of the profiled dual: F_xx - F_xe F_ee^{-1} F_ex with rows
  /// d_i = (g_i, h_i) weighted by w_i^2.
  Matrix hessian(const Vector& x) const {
    const double n = double(g.rows());
    const Vector uu = u(x);
    const double eta = solve_eta(uu);
    const Vector w2 = (eta + uu.array()).inverse().square().matrix();
    Matrix d(g.rows(), g.cols() + h.cols());
    d << g, h;
    const Vector dw = d.transpose() * w2 / n;
    Matrix hess = d.transpose() * w2.asDiagonal() * d / n;
    hess -= dw * dw.transpose() / (w2.sum() / n);
    hess.bottomRightCorner(h.cols(), h.cols()).diagonal().array() += n * rho;
    return hess;
  }

  Vector weights(const Vector& x) const {
    const Vector uu = u(x);
    const double eta = solve_eta(uu);
    return (eta + uu.array()).inverse().matrix();
  }
};

inline BalancingDual make_balancing_dual(const Matrix& a_star, const Matrix& z_star, double rho) {
  const Index n = a_star.rows(), k = a_star.cols(), p = z_star.cols();
  BalancingDual dual;
  dual.g.resize(n, k + p);
  dual.g << a_star, z_star;
  dual.h.resize(n, k * p);
  for (Index l = 0; l < p; ++l) {
    for (Index j = 0; j < k; ++j) {
      dual.h.col(j + k * l) = a_star.col(j).cwiseProduct(z_star.col(l));
    }
  }
  dual.rho = rho;
  return dual;
}

}  // namespace detail

/// Penalized empirical-likelihood balancing weights:
///   max sum_i log w_i - |vec Gamma|^2 / (2 rho)
///   s.t. sum w = n, (1/n) sum w A* Z*^T = Gamma, sum w A* = 0, sum w Z* = 0.
/// Solved through its dual in the K + p + K*p multipliers by BFGS; Gamma is
/// profiled out (Gamma = n rho mu at the optimum).
inline WeightSet fit_nonparametric_weights(const Matrix& a_star, const Matrix& z_star,
                                           double rho,
                                           const NonparametricOptions& options = {}) {
  const Index n = a_star.rows(), k = a_star.cols(), p = z_star.cols();
  if (z_star.rows() != n) throw InvalidArgument("fit_nonparametric_weights: row counts differ");
  if (!(n > k + p + 1)) throw InvalidArgument("fit_nonparametric_weights needs n > K + p + 1");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("rho must be positive");

  const auto dual = detail::make_balancing_dual(a_star, z_star, rho);
  // A one-signed exact-balance column cannot average to zero under positive
  // weights.
  for (Index j = 0; j < dual.g.cols(); ++j) {
    const auto col = dual.g.col(j);
    if ((col.minCoeff() >= 0.0 || col.maxCoeff() <= 0.0) && col.cwiseAbs().maxCoeff() > 0.0) {
      throw EstimationError("no interior point: balance constraints are infeasible");
    }
  }

  BfgsOptions bopt;
  bopt.max_iter = options.max_iter;
  bopt.grad_tol = options.grad_tol;
  const Vector x0 = Vector::Zero(dual.g.cols() + dual.h.cols());
  BfgsResult res = minimize_bfgs(dual, x0, bopt);

  if (res.value < -30.0 || !std::isfinite(res.value)) {
    throw EstimationError("no interior point: balancing dual is unbounded");
  }
  // Near the optimum the line search runs out of digits in the dual value;
  // finish with Newton steps judged on the gradient norm instead.
  for (int it = 0; !res.converged && it < 20; ++it) {
    Eigen::LDLT<Matrix> ldlt(dual.hessian(res.x));
    if (ldlt.info() != Eigen::Success) break;
    const Vector step = ldlt.solve(-res.gradient);
    const double g0 = res.gradient.cwiseAbs().maxCoeff();
    bool moved = false;
    for (double t = 1.0; t > 1e-6; t *= 0.5) {
      Vector xt = res.x + t * step, gt;
      const double ft = dual(xt, gt);
      if (std::isfinite(ft) && gt.cwiseAbs().maxCoeff() < g0) {
        res.x = std::move(xt);
        res.gradient = std::move(gt);
        res.value = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    ++res.iterations;
    res.converged = res.gradient.cwiseAbs().maxCoeff() <= options.grad_tol;
  }
  const double gnorm = res.gradient.cwiseAbs().maxCoeff();
  if (!res.converged) {
    std::ostringstream msg;
    msg << "nonparametric weights did not converge after " << res.iterations
        << " quasi-Newton iterations (gradient norm " << gnorm << ")";
    throw EstimationError(msg.str());
  }

  WeightSet set;
  set.method = WeightMethod::kNonparametric;
  set.rho = rho;
  set.iterations = res.iterations;
  set.gradient_norm = gnorm;
  set.dual = res.x;
  const Vector raw = dual.weights(res.x);
  set.eta = detail::solve_eta(dual.u(res.x));
  set.weights = detail::normalize_mean_one(raw);
  const Vector gamma_vec = dual.h.transpose() * set.weights / double(n);
  set.gamma_slack = Eigen::Map<const Matrix>(gamma_vec.data(), k, p);
  set.objective = set.weights.array().log().sum() - gamma_vec.squaredNorm() / (2.0 * rho);
  set.diagnostics = balance_diagnostics(set.weights, a_star, z_star);
  return set;
}

/// Unit weights with their (unweighted) diagnostics.
inline WeightSet unit_weights(const Matrix& a_star, const Matrix& z_star) {
  WeightSet set;
  set.method = WeightMethod::kUnit;
  set.weights = Vector::Ones(a_star.rows());
  set.diagnostics = balance_diagnostics(set.weights, a_star, z_star);
  return set;
}

}  // namespace fcs

#endif  // FCS_WEIGHTS_HPP
