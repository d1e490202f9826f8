#ifndef FCS_SIM_HPP
#define FCS_SIM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fcs/causal.hpp"
#include "fcs/error.hpp"
#include "fcs/fpca.hpp"
#include "fcs/linalg.hpp"
#include "fcs/parallel.hpp"
#include "fcs/random.hpp"
#include "fcs/survival.hpp"

namespace fcs {

/// Variance knobs of the generating law. `table()` reproduces the published
/// accuracy tables (unit score variance, noise "N(0, 0.5)" read as SD 0.5);
/// `literal()` takes the written text at face value (score variance sqrt(6),
/// noise variances 0.5).
struct DgpParams {
  double score_var = 1.0;         // Var(W_k)
  double z1_noise_var = 0.25;     // Var(e_1) in Z_1 = W_1 + e_1
  double outcome_noise_sd = 0.5;  // SD(e) in the log-time model

  static DgpParams table() { return {}; }
  static DgpParams literal() { return {std::sqrt(6.0), 0.5, std::sqrt(0.5)}; }
};

/// Censoring times C = m U with U ~ Uniform(0.5, 1.5), i.e. C ~ Uniform(a, b)
/// with a = m/2, b = 3m/2. Stored on the log scale: log T can exceed the
/// double range on the time scale.
struct CensoringBounds {
  double log_scale = std::numeric_limits<double>::infinity();  // log m; +inf = none

  bool none() const { return !std::isfinite(log_scale); }
  double a() const { return std::exp(log_scale) * 0.5; }
  double b() const { return std::exp(log_scale) * 1.5; }
};

struct ScenarioConfig {
  int scenario = 1;
  Index n = 400;
  double censor_target = 0.2;
  Index grid_size = 101;
  std::uint64_t seed = 1;
  DgpParams dgp;
  std::optional<CensoringBounds> censoring;  // calibrated on demand when absent

  void validate() const {
    if (scenario != 1 && scenario != 2) throw InvalidArgument("scenario must be 1 or 2");
    if (n < 50) throw InvalidArgument("n must be at least 50");
    if (!(censor_target >= 0.0 && censor_target <= 0.9)) {
      throw InvalidArgument("censor_target must lie in [0, 0.9]");
    }
    if (grid_size < 2) throw InvalidArgument("grid_size must be at least 2");
    if (!(dgp.score_var > 0.0 && dgp.z1_noise_var >= 0.0 && dgp.outcome_noise_sd >= 0.0)) {
      throw InvalidArgument("DGP variances must be nonnegative (score variance positive)");
    }
  }
};

struct SimulatedDataset {
  FunctionalSample treatment;
  Matrix covariates;  // n x 3
  SurvivalSample survival;
  Vector true_beta_curve;
  Vector true_log_time;    // uncensored Y
  Vector causal_log_time;  // Y with the confounder term at its population mean
  Vector noise;            // e
  Matrix w;                // generating W
  Matrix scores;           // generating A
  CensoringBounds censoring;
};

namespace sim_detail {

inline const Vector& score_scales() {
  static const Vector s = (Vector(6) << 4.0, std::sqrt(12.0), std::sqrt(8.0), 2.0, 1.0,
                           1.0 / std::sqrt(2.0))
                              .finished();
  return s;
}

/// phi_{2k-1} = sin(2 pi k s), phi_{2k} = cos(2 pi k s), unnormalized.
inline double basis_fn(Index k, double s) {
  const double freq = 2.0 * std::numbers::pi * double(k / 2 + 1);
  return k % 2 == 0 ? std::sin(freq * s) : std::cos(freq * s);
}

/// int beta_0 X = sum_k c_k A_k with beta_0 = 2 phi_1 + phi_2 + phi_3/2 +
/// phi_4/2 and int phi_j phi_k = delta_jk / 2.
inline const Vector& beta_score_coeffs() {
  static const Vector c = (Vector(6) << 1.0, 0.5, 0.25, 0.25, 0.0, 0.0).finished();
  return c;
}

struct Draws {
  Matrix w;        // n x 6
  Matrix z;        // n x 3
  Vector e;        // n
  Vector log_u;    // n, log U with U ~ Uniform(0.5, 1.5)
};

inline Draws draw(Index n, const DgpParams& dgp, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Draws d;
  d.w.resize(n, 6);
  d.z.resize(n, 3);
  d.e.resize(n);
  d.log_u.resize(n);
  const double sw = std::sqrt(dgp.score_var), se1 = std::sqrt(dgp.z1_noise_var);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < 6; ++k) d.w(i, k) = sw * norm(rng);
    d.z(i, 0) = d.w(i, 0) + se1 * norm(rng);
    d.z(i, 1) = 0.2 * d.w(i, 1) + norm(rng);
    d.z(i, 2) = 0.2 * d.w(i, 2) + norm(rng);
    d.e(i) = dgp.outcome_noise_sd * norm(rng);
    d.log_u(i) = std::log(unif(rng));
  }
  return d;
}

struct Outcomes {
  Vector y;
  Vector causal;
};

inline Outcomes outcomes(int scenario, const DgpParams& dgp, const Matrix& a, const Matrix& z,
                         const Vector& e) {
  const Vector lin = a * beta_score_coeffs();
  Outcomes o;
  o.y = (1.0 + lin.array() + 2.0 * z.col(0).array() + e.array()).matrix();
  // Confounder term replaced by its population mean: E Z_1 = 0.
  o.causal = (1.0 + lin.array() + e.array()).matrix();
  if (scenario == 2) {
    const double ez1sq = dgp.score_var + dgp.z1_noise_var;
    o.y.array() += 2.0 * z.col(0).array().square() * a.col(0).array();
    o.causal.array() += 2.0 * ez1sq * a.col(0).array();
  }
  return o;
}

inline double censoring_rate(const Vector& y, const Vector& log_u, double log_scale) {
  Index c = 0;
  for (Index i = 0; i < y.size(); ++i) c += y(i) > log_scale + log_u(i) ? 1 : 0;
  return double(c) / double(y.size());
}

}  // namespace sim_detail

/// beta_0(s) = 2 sin(2 pi s) + cos(2 pi s) + sin(4 pi s)/2 + cos(4 pi s)/2.
inline Vector true_beta(const Vector& grid) {
  Vector b(grid.size());
  for (Index m = 0; m < grid.size(); ++m) {
    const double s = grid(m);
    b(m) = 2.0 * sim_detail::basis_fn(0, s) + sim_detail::basis_fn(1, s) +
           0.5 * sim_detail::basis_fn(2, s) + 0.5 * sim_detail::basis_fn(3, s);
  }
  return b;
}

inline Vector uniform_grid(Index m) {
  return Vector::LinSpaced(m, 0.0, 1.0);
}

/// Bisection of the censoring scale m on a probe sample until the censoring
/// rate is within 0.2 points of the target. Target 0 returns no censoring (a above
/// every probe time).
inline CensoringBounds calibrate_censoring(int scenario, Index n_probe, double censor_target,
                                           std::uint64_t seed, const DgpParams& dgp = {}) {
  if (!(censor_target >= 0.0 && censor_target <= 0.9)) {
    throw InvalidArgument("censor_target must lie in [0, 0.9]");
  }
  if (n_probe < 100) throw InvalidArgument("n_probe must be at least 100");
  const auto d = sim_detail::draw(n_probe, dgp, seed);
  Matrix a = d.w * sim_detail::score_scales().asDiagonal();
  const Vector y = sim_detail::outcomes(scenario, dgp, a, d.z, d.e).y;
  CensoringBounds cb;
  if (censor_target == 0.0) {
    cb.log_scale = y.maxCoeff() + 1.0;  // a = m/2 > max T
    return cb;
  }
  double lo = y.minCoeff() - 1.0, hi = y.maxCoeff() + 1.0;  // rate(lo) = 1, rate(hi) = 0
  double mid = 0.5 * (lo + hi), rate = 0.0;
  for (int step = 0; step < 60; ++step) {
    mid = 0.5 * (lo + hi);
    rate = sim_detail::censoring_rate(y, d.log_u, mid);
    if (std::abs(rate - censor_target) <= 0.002) {
      cb.log_scale = mid;
      return cb;
    }
    if (rate > censor_target) lo = mid; else hi = mid;
  }
  std::ostringstream msg;
  msg << "censoring target " << censor_target << " unreachable; achieved " << rate;
  throw EstimationError(msg.str());
}

inline std::uint64_t probe_seed(int scenario, double censor_target) {
  return derive_seed(0x5eedc0ffeeULL,
                     {std::uint64_t(scenario), std::uint64_t(std::llround(censor_target * 1e4))});
}

/// One dataset of the two-scenario design. Reproducible from config.seed.
inline SimulatedDataset generate_scenario(const ScenarioConfig& config) {
  config.validate();
  const CensoringBounds cb =
      config.censoring ? *config.censoring
                       : calibrate_censoring(config.scenario, 20000, config.censor_target,
                                             probe_seed(config.scenario, config.censor_target),
                                             config.dgp);
  const Index n = config.n, m = config.grid_size;
  const auto d = sim_detail::draw(n, config.dgp, config.seed);

  SimulatedDataset out;
  out.w = d.w;
  out.scores = d.w * sim_detail::score_scales().asDiagonal();
  const Vector grid = uniform_grid(m);
  Matrix phi(6, m);
  for (Index k = 0; k < 6; ++k) {
    for (Index j = 0; j < m; ++j) phi(k, j) = sim_detail::basis_fn(k, grid(j));
  }
  out.treatment = FunctionalSample(grid, out.scores * phi);
  out.covariates = d.z;
  out.noise = d.e;
  const auto o = sim_detail::outcomes(config.scenario, config.dgp, out.scores, d.z, d.e);
  out.true_log_time = o.y;
  out.causal_log_time = o.causal;
  out.true_beta_curve = true_beta(grid);
  out.censoring = cb;

  Vector obs = o.y;
  IntVector delta = IntVector::Ones(n);
  if (config.censor_target > 0.0 && !cb.none()) {
    for (Index i = 0; i < n; ++i) {
      const double log_c = cb.log_scale + d.log_u(i);
      if (o.y(i) > log_c) {
        obs(i) = log_c;
        delta(i) = 0;
      }
    }
  }
  out.survival = SurvivalSample::from_log_times(obs, delta);
  return out;
}

// ---------------------------------------------------------------- metrics

/// int (est - truth)^2 / int truth^2.
inline double rmse_beta(const Vector& est, const Vector& truth, const Vector& grid) {
  const double denom = inner_product(truth, truth, grid);
  if (!(denom > 0.0)) throw InvalidArgument("rmse_beta: true curve has zero norm");
  const Vector d = est - truth;
  return inner_product(d, d, grid) / denom;
}

/// Mean over grid points of the squared deviation of the replication-mean curve.
inline double isb(const Vector& est_mean, const Vector& truth, const Vector& grid) {
  if (est_mean.size() != grid.size() || truth.size() != grid.size()) {
    throw InvalidArgument("isb: length mismatch");
  }
  return (est_mean - truth).squaredNorm() / double(grid.size());
}

inline double ise(const Vector& est, const Vector& truth, const Vector& grid) {
  const Vector d = est - truth;
  const double domain = grid(grid.size() - 1) - grid(0);
  return inner_product(d, d, grid) / domain;
}

struct IseSummary {
  double aise = 0.0;
  double se = 0.0;
  double mise = 0.0;
};

inline IseSummary summarize_ise(const std::vector<double>& ises) {
  if (ises.empty()) throw InvalidArgument("no replications");
  IseSummary s;
  const Vector v = Eigen::Map<const Vector>(ises.data(), Index(ises.size()));
  s.aise = v.mean();
  s.se = ises.size() > 1 ? linalg::sample_sd(v) / std::sqrt(double(ises.size())) : 0.0;
  s.mise = linalg::median(ises);
  return s;
}

/// (AISE, SE of the mean, median ISE) over per-replication curves.
inline IseSummary ise_aise_mise(const std::vector<Vector>& curves, const Vector& truth,
                                const Vector& grid) {
  std::vector<double> ises;
  ises.reserve(curves.size());
  for (const auto& c : curves) ises.push_back(ise(c, truth, grid));
  return summarize_ise(ises);
}

inline double root_mse_prediction(const Vector& predicted, const Vector& truth) {
  if (predicted.size() == 0) throw InvalidArgument("root_mse_prediction: empty holdout");
  if (predicted.size() != truth.size()) throw InvalidArgument("root_mse_prediction: length mismatch");
  return std::sqrt((predicted - truth).squaredNorm() / double(truth.size()));
}

// ---------------------------------------------------------------- study

enum class EstimatorId { kNaive, kRegAdj, kFipwPara, kFipwNp, kDrPara, kDrNp };

inline const std::vector<EstimatorId>& all_estimators() {
  static const std::vector<EstimatorId> v{EstimatorId::kNaive,   EstimatorId::kRegAdj,
                                          EstimatorId::kFipwPara, EstimatorId::kFipwNp,
                                          EstimatorId::kDrPara,  EstimatorId::kDrNp};
  return v;
}

inline const char* to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::kNaive: return "Naive";
    case EstimatorId::kRegAdj: return "RegAdj";
    case EstimatorId::kFipwPara: return "FIPW-para";
    case EstimatorId::kFipwNp: return "FIPW-np";
    case EstimatorId::kDrPara: return "DR.para";
    case EstimatorId::kDrNp: return "DR.np";
  }
  return "unknown";
}

inline std::optional<EstimatorId> estimator_from_string(const std::string& s) {
  for (EstimatorId id : all_estimators()) {
    if (s == to_string(id)) return id;
  }
  return std::nullopt;
}

struct StudyOptions {
  int reps = 100;
  int threads = 1;
  std::uint64_t master_seed = 20240101;
  std::vector<EstimatorId> methods = all_estimators();
  CausalConfig causal;
  double rho = 0.0;  // <= 0: 0.1/n
  double train_fraction = 0.8;
  bool prediction = true;  // 80/20 split fits for Root-MSE
  bool keep_curves = false;
};

struct Quartiles {
  double mean = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0;
};

inline Quartiles summarize_quartiles(const std::vector<double>& v) {
  Quartiles q;
  if (v.empty()) return q;
  q.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  q.q25 = linalg::quantile(v, 0.25);
  q.q50 = linalg::quantile(v, 0.50);
  q.q75 = linalg::quantile(v, 0.75);
  return q;
}

/// Aggregates for one (setting, estimator) cell.
struct StudyCell {
  int scenario = 1;
  Index n = 0;
  double censor_target = 0.0;
  EstimatorId method = EstimatorId::kNaive;
  int replications = 0;  // successful
  int failures = 0;
  double censoring_rate = 0.0;  // mean achieved
  double rmse = 0.0;
  double isb = 0.0;
  IseSummary ise;
  Quartiles root_mse_in;
  Quartiles root_mse_out;
  int prediction_failures = 0;
  Vector mean_curve;
  std::vector<Vector> curves;  // kept on request
  std::vector<double> ises;
};

struct StudyResult {
  Vector grid;
  Vector true_curve;
  std::vector<StudyCell> cells;

  const StudyCell& cell(int scenario, double censor_target, EstimatorId method) const {
    for (const auto& c : cells) {
      if (c.scenario == scenario && c.censor_target == censor_target && c.method == method) return c;
    }
    throw InvalidArgument("no such study cell");
  }
};

namespace sim_detail {

struct RepOutcome {
  std::vector<std::optional<Vector>> curves;    // per method
  std::vector<std::optional<double>> rmse_in;   // per method
  std::vector<std::optional<double>> rmse_out;  // per method
  double censoring_rate = 0.0;
};

/// All requested estimators on one dataset; failures leave empty slots.
inline std::vector<std::optional<CausalEstimate>> run_estimators(
    const CausalDataset& data, const std::vector<EstimatorId>& methods, double rho) {
  std::vector<std::optional<CausalEstimate>> out(methods.size());
  std::optional<WeightSet> para, np;
  bool para_failed = false, np_failed = false;
  auto get_weights = [&](bool parametric) -> const WeightSet* {
    auto& slot = parametric ? para : np;
    bool& failed = parametric ? para_failed : np_failed;
    if (!slot && !failed) {
      try {
        slot = compute_weights(data, parametric ? WeightSpec::make_parametric()
                                                : WeightSpec::make_nonparametric(rho));
      } catch (const Error&) {
        failed = true;
      }
    }
    return slot ? &*slot : nullptr;
  };
  for (std::size_t j = 0; j < methods.size(); ++j) {
    try {
      switch (methods[j]) {
        case EstimatorId::kNaive: out[j] = estimate_naive(data); break;
        case EstimatorId::kRegAdj: out[j] = estimate_reg_adjust(data); break;
        case EstimatorId::kFipwPara:
        case EstimatorId::kFipwNp: {
          const WeightSet* w = get_weights(methods[j] == EstimatorId::kFipwPara);
          if (w) out[j] = estimate_fipw(data, *w);
          break;
        }
        case EstimatorId::kDrPara:
        case EstimatorId::kDrNp: {
          const WeightSet* w = get_weights(methods[j] == EstimatorId::kDrPara);
          if (w) out[j] = estimate_double_robust(data, *w);
          break;
        }
      }
    } catch (const Error&) {
      out[j].reset();
    }
  }
  return out;
}

inline RepOutcome run_replication(const ScenarioConfig& config, const StudyOptions& opt) {
  RepOutcome rep;
  const std::size_t nm = opt.methods.size();
  rep.curves.resize(nm);
  rep.rmse_in.resize(nm);
  rep.rmse_out.resize(nm);
  SimulatedDataset sim;
  try {
    sim = generate_scenario(config);
  } catch (const Error&) {
    return rep;
  }
  rep.censoring_rate = sim.survival.censoring_rate();
  try {
    const CausalDataset data(sim.treatment, sim.covariates, sim.survival, opt.causal);
    auto ests = run_estimators(data, opt.methods, opt.rho);
    for (std::size_t j = 0; j < nm; ++j) {
      if (ests[j]) rep.curves[j] = ests[j]->beta_curve;
    }
  } catch (const Error&) {
  }
  if (!opt.prediction) return rep;

  // 80/20 split from a stream derived from the replication seed.
  const Index n = config.n;
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  Rng rng(derive_seed(config.seed, {0x5b117ULL}));
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_train = std::size_t(std::llround(opt.train_fraction * double(n)));
  std::vector<Index> train(perm.begin(), perm.begin() + std::ptrdiff_t(n_train));
  std::vector<Index> test(perm.begin() + std::ptrdiff_t(n_train), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  try {
    const CausalDataset tr(sim.treatment.subset(train),
                           linalg::select_rows(sim.covariates, train),
                           sim.survival.subset(train), opt.causal);
    auto ests = run_estimators(tr, opt.methods, opt.rho);
    const Matrix test_curves = linalg::select_rows(sim.treatment.values(), test);
    const Vector causal_train = linalg::select_rows(sim.causal_log_time, train);
    const Vector causal_test = linalg::select_rows(sim.causal_log_time, test);
    for (std::size_t j = 0; j < nm; ++j) {
      if (!ests[j]) continue;
      Vector pin = tr.scores() * ests[j]->fit.params.beta_scores;
      pin.array() += ests[j]->fit.params.alpha;
      rep.rmse_in[j] = root_mse_prediction(pin, causal_train);
      if (!test.empty()) {
        rep.rmse_out[j] =
            root_mse_prediction(predict_log_time(*ests[j], tr.basis(), test_curves), causal_test);
      }
    }
  } catch (const Error&) {
  }
  return rep;
}

}  // namespace sim_detail

/// Replication study over settings x estimators. Replicate r of setting s
/// uses seed derive_seed(master, {s, r}); censoring is calibrated once per
/// setting. Results do not depend on the thread count.
inline StudyResult run_study(std::vector<ScenarioConfig> settings, const StudyOptions& opt) {
  if (opt.reps < 2) throw InvalidArgument("reps must be at least 2");
  if (settings.empty()) throw InvalidArgument("no settings");
  if (opt.methods.empty()) throw InvalidArgument("no estimators selected");
  if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
  for (auto& s : settings) {
    s.validate();
    if (s.grid_size != settings.front().grid_size) {
      throw InvalidArgument("all settings must share the grid size");
    }
    if (!s.censoring) {
      s.censoring = calibrate_censoring(s.scenario, 20000, s.censor_target,
                                        probe_seed(s.scenario, s.censor_target), s.dgp);
    }
  }
  const std::size_t ns = settings.size(), nr = std::size_t(opt.reps), nm = opt.methods.size();
  std::vector<sim_detail::RepOutcome> reps(ns * nr);
  parallel_for(ns * nr, opt.threads, [&](std::size_t idx) {
    const std::size_t s = idx / nr, r = idx % nr;
    ScenarioConfig cfg = settings[s];
    cfg.seed = derive_seed(opt.master_seed, {std::uint64_t(s), std::uint64_t(r)});
    reps[idx] = sim_detail::run_replication(cfg, opt);
  });

  StudyResult result;
  result.grid = uniform_grid(settings.front().grid_size);
  result.true_curve = true_beta(result.grid);
  for (std::size_t s = 0; s < ns; ++s) {
    double cens = 0.0;
    for (std::size_t r = 0; r < nr; ++r) cens += reps[s * nr + r].censoring_rate;
    for (std::size_t j = 0; j < nm; ++j) {
      StudyCell cell;
      cell.scenario = settings[s].scenario;
      cell.n = settings[s].n;
      cell.censor_target = settings[s].censor_target;
      cell.method = opt.methods[j];
      cell.censoring_rate = cens / double(nr);
      cell.mean_curve = Vector::Zero(result.grid.size());
      std::vector<double> in, out;
      for (std::size_t r = 0; r < nr; ++r) {
        const auto& rep = reps[s * nr + r];
        if (rep.curves[j]) {
          ++cell.replications;
          cell.mean_curve += *rep.curves[j];
          cell.ises.push_back(ise(*rep.curves[j], result.true_curve, result.grid));
          if (opt.keep_curves) cell.curves.push_back(*rep.curves[j]);
        } else {
          ++cell.failures;
        }
        if (opt.prediction) {
          if (rep.rmse_in[j] && rep.rmse_out[j]) {
            in.push_back(*rep.rmse_in[j]);
            out.push_back(*rep.rmse_out[j]);
          } else {
            ++cell.prediction_failures;
          }
        }
      }
      if (cell.replications > 0) {
        cell.mean_curve /= double(cell.replications);
        cell.rmse = rmse_beta(cell.mean_curve, result.true_curve, result.grid);
        cell.isb = isb(cell.mean_curve, result.true_curve, result.grid);
        cell.ise = summarize_ise(cell.ises);
      }
      cell.root_mse_in = summarize_quartiles(in);
      cell.root_mse_out = summarize_quartiles(out);
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

}  // namespace fcs

#endif  // FCS_SIM_HPP
