#ifndef FCS_CAUSAL_HPP
#define FCS_CAUSAL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "fcs/aft_model.hpp"
#include "fcs/error.hpp"
#include "fcs/faft.hpp"
#include "fcs/fpca.hpp"
#include "fcs/linalg.hpp"
#include "fcs/survival.hpp"
#include "fcs/weights.hpp"

namespace fcs {

struct CausalConfig {
  double pve = 0.95;          // outcome basis (K)
  double pve_weights = 0.95;  // weight basis (K*)
  FaftOptions faft;
};

/// Observed data: functional treatment, scalar covariates and right-censored
/// outcomes, with the FPCA artifacts for both truncation levels.
class CausalDataset {
 public:
  CausalDataset(FunctionalSample treatment, Matrix covariates, SurvivalSample survival,
                CausalConfig config = {})
      : treatment_(std::move(treatment)),
        covariates_(std::move(covariates)),
        survival_(std::move(survival)),
        config_(config) {
    const Index n = treatment_.size();
    if (covariates_.size() == 0) covariates_.resize(n, 0);
    if (covariates_.rows() != n || survival_.size() != n) {
      throw InvalidArgument("row counts differ: treatment " + std::to_string(n) +
                            ", covariates " + std::to_string(covariates_.rows()) +
                            ", survival " + std::to_string(survival_.size()));
    }
    if (!covariates_.allFinite()) throw DataError("covariates contain non-finite entries");
    outcome_ = estimate_fpca(treatment_, config_.pve);
    if (config_.pve_weights == config_.pve) {
      weight_ = outcome_;
    } else {
      weight_ = estimate_fpca(treatment_, config_.pve_weights);
    }
    weight_.scores = standardize_scores(weight_.scores, weight_.basis);
  }

  const FunctionalSample& treatment() const { return treatment_; }
  const Matrix& covariates() const { return covariates_; }
  const SurvivalSample& survival() const { return survival_; }
  const CausalConfig& config() const { return config_; }
  Index size() const { return treatment_.size(); }

  const FpcaBasis& basis() const { return outcome_.basis; }
  const Matrix& scores() const { return outcome_.scores.scores; }
  const FpcaBasis& weight_basis() const { return weight_.basis; }
  const Matrix& weight_scores_standardized() const { return weight_.scores.standardized; }

  /// Z* for the weight models: centered at the sample mean, then whitened.
  /// Computed per call.
  Matrix covariates_standardized() const {
    const Matrix zc = covariates_.rowwise() - covariates_.colwise().mean();
    return standardize_covariates(zc).z_star;
  }

 private:
  FunctionalSample treatment_;
  Matrix covariates_;
  SurvivalSample survival_;
  CausalConfig config_;
  FpcaResult outcome_;
  FpcaResult weight_;
};

enum class CausalMethod { kNaive, kRegAdjust, kFipw, kDoubleRobust };

inline const char* to_string(CausalMethod m) {
  switch (m) {
    case CausalMethod::kNaive: return "naive";
    case CausalMethod::kRegAdjust: return "reg_adjust";
    case CausalMethod::kFipw: return "fipw";
    case CausalMethod::kDoubleRobust: return "double_robust";
  }
  return "unknown";
}

/// Which weights FIPW / DR use.
struct WeightSpec {
  WeightMethod method = WeightMethod::kNonparametric;
  double rho = 0.0;  // nonparametric; <= 0 selects the default 0.1/n
  ParametricOptions parametric;
  NonparametricOptions nonparametric;
  Vector fixed;  // kFixed

  static WeightSpec make_parametric(ParametricOptions opt = {}) {
    WeightSpec s;
    s.method = WeightMethod::kParametric;
    s.parametric = opt;
    return s;
  }
  static WeightSpec make_nonparametric(double rho = 0.0) {
    WeightSpec s;
    s.method = WeightMethod::kNonparametric;
    s.rho = rho;
    return s;
  }
  static WeightSpec make_fixed(Vector w) {
    WeightSpec s;
    s.method = WeightMethod::kFixed;
    s.fixed = std::move(w);
    return s;
  }
};

/// Weights on the K* basis: A* from the weight basis, Z* whitened covariates.
inline WeightSet compute_weights(const CausalDataset& data, const WeightSpec& spec) {
  const Index n = data.size();
  if (spec.method == WeightMethod::kFixed || spec.method == WeightMethod::kUnit) {
    WeightSet set;
    set.method = spec.method;
    set.weights = spec.method == WeightMethod::kUnit ? Vector(Vector::Ones(n)) : spec.fixed;
    if (set.weights.size() != n) throw InvalidArgument("fixed weights length does not match n");
    if (!set.weights.allFinite() || !(set.weights.minCoeff() > 0.0)) {
      throw InvalidArgument("fixed weights must be finite and positive");
    }
    if (data.covariates().cols() > 0) {
      set.diagnostics = balance_diagnostics(set.weights, data.weight_scores_standardized(),
                                            data.covariates_standardized());
    }
    return set;
  }
  if (data.covariates().cols() == 0) {
    throw InvalidArgument("weights need at least one covariate");
  }
  const Matrix& a_star = data.weight_scores_standardized();
  const Matrix z_star = data.covariates_standardized();
  if (spec.method == WeightMethod::kParametric) {
    return fit_parametric_weights(a_star, z_star, spec.parametric).second;
  }
  const double rho = spec.rho > 0.0 ? spec.rho : rho_preset(RhoPreset::kDefault, n);
  return fit_nonparametric_weights(a_star, z_star, rho, spec.nonparametric);
}

struct CausalEstimate {
  CausalMethod method = CausalMethod::kNaive;
  std::optional<WeightMethod> weight_method;
  Vector beta_curve;
  FaftFit fit;  // final-stage fit on (1, A)
  std::optional<WeightSet> weights;
  std::optional<FaftFit> outcome_fit;  // full (1, A, Z) fit for RegAdj / DR
};

namespace detail {

inline CausalEstimate finish(CausalMethod method, FaftFit fit, const FpcaBasis& basis) {
  CausalEstimate est;
  est.method = method;
  recover_beta(fit, basis);
  est.beta_curve = fit.beta_curve;
  est.fit = std::move(fit);
  return est;
}

}  // namespace detail

/// FAFT on (1, A) ignoring covariates.
inline CausalEstimate estimate_naive(const CausalDataset& data) {
  const FaftDesign design(data.scores());
  return detail::finish(CausalMethod::kNaive,
                        fit_faft(design, data.survival(), data.config().faft), data.basis());
}

/// Full outcome model on (1, A, Z).
inline FaftFit fit_outcome_model(const CausalDataset& data) {
  const FaftDesign design(data.scores(), data.covariates());
  return fit_faft(design, data.survival(), data.config().faft);
}

/// Y-hat_i = alpha + A_i^T beta + (1/n) sum_j gamma^T Z_j.
inline Vector reg_adjust_responses(const FaftParams& full, const Matrix& scores,
                                   const Matrix& covariates) {
  Vector y = scores * full.beta_scores;
  double conf = 0.0;
  if (covariates.cols() > 0) conf = (covariates * full.gamma).mean();
  y.array() += full.alpha + conf;
  return y;
}

/// Y-tilde_i = Y-hat_i + w_i (Y_i^imp - Y-hat_i).
inline Vector dr_pseudo_outcomes(const Vector& y_reg, const Vector& y_imp, const Vector& w) {
  if (y_reg.size() != y_imp.size() || w.size() != y_imp.size()) {
    throw InvalidArgument("dr_pseudo_outcomes: lengths differ");
  }
  Vector out(y_imp.size());
  for (Index i = 0; i < out.size(); ++i) {
    // Unit weight: the imputed value itself, free of rounding.
    out(i) = w(i) == 1.0 ? y_imp(i) : y_reg(i) + w(i) * (y_imp(i) - y_reg(i));
  }
  return out;
}

/// Regression adjustment: full fit, averaged-confounder responses, refit on A
/// treating the constructed responses as fully observed.
inline CausalEstimate estimate_reg_adjust(const CausalDataset& data) {
  FaftFit full = fit_outcome_model(data);
  const Vector y_hat = reg_adjust_responses(full.params, data.scores(), data.covariates());
  const FaftDesign design(data.scores());
  CausalEstimate est = detail::finish(
      CausalMethod::kRegAdjust,
      fit_faft(design, SurvivalSample::uncensored(y_hat), data.config().faft), data.basis());
  est.outcome_fit = std::move(full);
  return est;
}

/// Weighted pseudo-sample fit of (1, A) with precomputed weights.
inline CausalEstimate estimate_fipw(const CausalDataset& data, WeightSet weights) {
  const FaftDesign design(data.scores());
  CausalEstimate est = detail::finish(
      CausalMethod::kFipw, fit_faft(design, data.survival(), data.config().faft, weights.weights),
      data.basis());
  est.weight_method = weights.method;
  est.weights = std::move(weights);
  return est;
}

inline CausalEstimate estimate_fipw(const CausalDataset& data, const WeightSpec& spec) {
  return estimate_fipw(data, compute_weights(data, spec));
}

/// Double robust: regression-adjusted responses corrected by weighted
/// imputation residuals at the full-model fit, then refit on A.
inline CausalEstimate estimate_double_robust(const CausalDataset& data, WeightSet weights) {
  FaftFit full = fit_outcome_model(data);
  const Vector y_hat = reg_adjust_responses(full.params, data.scores(), data.covariates());
  const FaftDesign full_design(data.scores(), data.covariates());
  const Vector y_imp = impute_outcomes(full.params, full_design, data.survival());
  const Vector y_tilde = dr_pseudo_outcomes(y_hat, y_imp, weights.weights);
  const FaftDesign design(data.scores());
  CausalEstimate est = detail::finish(
      CausalMethod::kDoubleRobust,
      fit_faft(design, SurvivalSample::uncensored(y_tilde), data.config().faft), data.basis());
  est.outcome_fit = std::move(full);
  est.weight_method = weights.method;
  est.weights = std::move(weights);
  return est;
}

inline CausalEstimate estimate_double_robust(const CausalDataset& data, const WeightSpec& spec) {
  return estimate_double_robust(data, compute_weights(data, spec));
}

/// alpha + A beta for curves projected on the dataset's outcome basis.
inline Vector predict_log_time(const CausalEstimate& est, const FpcaBasis& basis,
                               const Matrix& curves) {
  const Matrix a = project_scores(basis, curves);
  Vector y = a * est.fit.params.beta_scores;
  y.array() += est.fit.params.alpha;
  return y;
}

}  // namespace fcs

#endif  // FCS_CAUSAL_HPP
