#ifndef FCS_SURVIVAL_HPP
#define FCS_SURVIVAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fcs/aft_model.hpp"
#include "fcs/error.hpp"
#include "fcs/linalg.hpp"

namespace fcs {

/// Right-censored outcomes on the log scale: Y_i = log min(T_i, C_i) and the
/// event indicators delta_i.
class SurvivalSample {
 public:
  SurvivalSample() = default;

  static SurvivalSample from_times(const Vector& obs_time, IntVector delta) {
    for (Index i = 0; i < obs_time.size(); ++i) {
      if (!(obs_time(i) > 0.0) || !std::isfinite(obs_time(i))) {
        throw DataError("obs_time must be positive (row " + std::to_string(i + 1) + ")");
      }
    }
    return SurvivalSample(obs_time.array().log().matrix(), std::move(delta));
  }

  static SurvivalSample from_log_times(Vector log_time, IntVector delta) {
    return SurvivalSample(std::move(log_time), std::move(delta));
  }

  const Vector& log_time() const { return log_time_; }
  const IntVector& delta() const { return delta_; }
  Vector obs_time() const { return log_time_.array().exp().matrix(); }
  Index size() const { return log_time_.size(); }
  Index num_events() const { return delta_.sum(); }
  double censoring_rate() const {
    return 1.0 - double(num_events()) / double(std::max<Index>(size(), 1));
  }

  SurvivalSample subset(const std::vector<Index>& rows) const {
    return SurvivalSample(linalg::select_rows(log_time_, rows),
                          linalg::select_rows(delta_, rows));
  }

  /// Same subjects treated as fully observed with the given log outcomes.
  static SurvivalSample uncensored(Vector log_time) {
    IntVector d = IntVector::Ones(log_time.size());
    return SurvivalSample(std::move(log_time), std::move(d));
  }

 private:
  SurvivalSample(Vector log_time, IntVector delta)
      : log_time_(std::move(log_time)), delta_(std::move(delta)) {
    if (log_time_.size() != delta_.size()) {
      throw InvalidArgument("log_time and delta lengths differ");
    }
    if (!log_time_.allFinite()) throw DataError("log times must be finite");
    for (Index i = 0; i < delta_.size(); ++i) {
      if (delta_(i) != 0 && delta_(i) != 1) {
        throw DataError("delta must be 0 or 1 (row " + std::to_string(i + 1) + ")");
      }
    }
    if (delta_.size() > 0 && delta_.sum() == 0) {
      throw DataError("all observations are censored; at least one event is required");
    }
  }

  Vector log_time_;
  IntVector delta_;
};

/// Kaplan-Meier step CDF of residuals. All ordered residuals are kept as
/// jump points; censored points carry zero mass.
struct ResidualCdf {
  Vector jump_points;  // ascending
  Vector cdf_values;   // F-hat at each jump point
  Vector jump_masses;  // mass at each jump point
  IntVector events;    // delta of each ordered point
  std::vector<Index> order;  // original index of each ordered point

  Index size() const { return jump_points.size(); }
  double remaining_mass() const { return size() == 0 ? 0.0 : 1.0 - cdf_values(size() - 1); }

  /// Efron's correction: the largest residual is treated as an event, so it
  /// absorbs the remaining survival mass and the masses sum to one.
  ResidualCdf with_tail_correction() const {
    ResidualCdf out = *this;
    if (size() == 0) return out;
    const Index last = size() - 1;
    out.jump_masses(last) += remaining_mass();
    out.cdf_values(last) = 1.0;
    out.events(last) = 1;
    return out;
  }
};

/// Product-limit estimate of the residual distribution. Ties are ordered with
/// events before censorings, then by input position.
inline ResidualCdf km_residual_cdf(const Vector& residuals, const IntVector& delta) {
  const Index n = residuals.size();
  if (delta.size() != n) throw InvalidArgument("km_residual_cdf: length mismatch");
  if (n == 0 || delta.sum() == 0) {
    throw DataError("km_residual_cdf: all observations censored");
  }
  ResidualCdf cdf;
  cdf.order.resize(std::size_t(n));
  std::iota(cdf.order.begin(), cdf.order.end(), Index{0});
  std::sort(cdf.order.begin(), cdf.order.end(), [&](Index a, Index b) {
    if (residuals(a) != residuals(b)) return residuals(a) < residuals(b);
    if (delta(a) != delta(b)) return delta(a) > delta(b);
    return a < b;
  });
  cdf.jump_points.resize(n);
  cdf.cdf_values.resize(n);
  cdf.jump_masses.resize(n);
  cdf.events.resize(n);
  double surv = 1.0;
  for (Index r = 0; r < n; ++r) {
    const Index i = cdf.order[std::size_t(r)];
    cdf.jump_points(r) = residuals(i);
    cdf.events(r) = delta(i);
    const double at_risk = double(n - r);
    double mass = 0.0;
    if (delta(i) == 1) {
      mass = surv / at_risk;
      surv *= (at_risk - 1.0) / at_risk;
    }
    cdf.jump_masses(r) = mass;
    cdf.cdf_values(r) = 1.0 - surv;
  }
  return cdf;
}

/// Precomputed suffix sums for repeated evaluation of E[e | e >= r] on one
/// tail-corrected CDF.
class TailExpectation {
 public:
  explicit TailExpectation(const ResidualCdf& raw) : cdf_(raw.with_tail_correction()) {
    const Index n = cdf_.size();
    suffix_mass_.resize(n + 1);
    suffix_moment_.resize(n + 1);
    suffix_mass_(n) = 0.0;
    suffix_moment_(n) = 0.0;
    for (Index j = n - 1; j >= 0; --j) {
      suffix_mass_(j) = suffix_mass_(j + 1) + cdf_.jump_masses(j);
      suffix_moment_(j) = suffix_moment_(j + 1) + cdf_.jump_masses(j) * cdf_.jump_points(j);
    }
  }

  double operator()(double r) const {
    const double* begin = cdf_.jump_points.data();
    const double* end = begin + cdf_.size();
    const Index j = std::lower_bound(begin, end, r) - begin;
    const double tail = suffix_mass_(j);
    if (!(tail > 0.0)) throw EstimationError("empty tail");
    return suffix_moment_(j) / tail;
  }

  const ResidualCdf& corrected() const { return cdf_; }

 private:
  ResidualCdf cdf_;
  Vector suffix_mass_;
  Vector suffix_moment_;
};

/// E-hat[e | e >= r] under the tail-corrected KM distribution; the
/// denominator is the mass at or beyond r, i.e. 1 - F-hat(r-).
inline double conditional_tail_expectation(const ResidualCdf& cdf, double r) {
  return TailExpectation(cdf)(r);
}

/// Buckley-James imputation around a linear predictor: censored subjects get
/// eta_i + E-hat[e | e >= Y_i - eta_i], events are returned unchanged.
inline Vector impute_from_linear_predictor(const Vector& eta, const SurvivalSample& sample) {
  const Index n = sample.size();
  if (eta.size() != n) throw InvalidArgument("impute: predictor length mismatch");
  const Vector& y = sample.log_time();
  const IntVector& d = sample.delta();
  if (d.sum() == n) return y;
  const Vector resid = y - eta;
  TailExpectation tail(km_residual_cdf(resid, d));
  Vector out = y;
  for (Index i = 0; i < n; ++i) {
    if (d(i) == 0) out(i) = eta(i) + tail(resid(i));
  }
  return out;
}

inline Vector impute_outcomes(const FaftParams& theta, const FaftDesign& design,
                              const SurvivalSample& sample) {
  if (design.rows() != sample.size()) {
    throw InvalidArgument("impute_outcomes: design and sample row counts differ");
  }
  return impute_from_linear_predictor(theta.linear_predictor(design), sample);
}

}  // namespace fcs

#endif  // FCS_SURVIVAL_HPP
