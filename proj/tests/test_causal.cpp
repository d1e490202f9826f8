#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fcs/causal.hpp"
#include "fcs/random.hpp"
#include "fcs/sim.hpp"

using namespace fcs;

namespace {

CausalDataset scenario_data(int scenario, double censor, std::uint64_t seed, Index n = 400) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.censor_target = censor;
  cfg.n = n;
  cfg.seed = seed;
  const SimulatedDataset d = generate_scenario(cfg);
  return CausalDataset(d.treatment, d.covariates, d.survival);
}

// Scenario-1 curves with covariates drawn independently of treatment and
// outcome; log times follow the functional model with no confounder term.
CausalDataset unconfounded_data(std::uint64_t seed, Index n, bool null_effect) {
  ScenarioConfig cfg;
  cfg.n = n;
  cfg.censor_target = 0.0;
  cfg.seed = seed;
  const SimulatedDataset d = generate_scenario(cfg);
  Rng rng(derive_seed(seed, {99}));
  std::normal_distribution<double> norm;
  Matrix z(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 3; ++j) z(i, j) = norm(rng);
  }
  Vector y = d.noise;
  y.array() += 1.0;
  if (!null_effect) y += d.scores * sim_detail::beta_score_coeffs();
  return CausalDataset(d.treatment, z, SurvivalSample::uncensored(y));
}

double l2_sq(const Vector& a, const Vector& b, const Vector& grid) {
  const Vector d = a - b;
  return inner_product(d, d, grid);
}

}  // namespace

class CausalReduction : public ::testing::TestWithParam<int> {};

TEST_P(CausalReduction, FipwWithUnitWeightsIsNaive) {
  const CausalDataset data = scenario_data(1 + GetParam() % 2, 0.3, 40 + GetParam());
  const CausalEstimate naive = estimate_naive(data);
  const CausalEstimate fipw =
      estimate_fipw(data, WeightSpec::make_fixed(Vector::Ones(data.size())));
  EXPECT_EQ(naive.beta_curve, fipw.beta_curve);
  EXPECT_EQ(naive.fit.params.stacked(), fipw.fit.params.stacked());
}

TEST_P(CausalReduction, DoubleRobustWithUnitWeightsIsNaiveOnImputed) {
  const CausalDataset data = scenario_data(1 + GetParam() % 2, 0.3, 60 + GetParam());
  const CausalEstimate dr =
      estimate_double_robust(data, WeightSpec::make_fixed(Vector::Ones(data.size())));
  const FaftDesign full(data.scores(), data.covariates());
  const Vector y_imp = impute_outcomes(dr.outcome_fit->params, full, data.survival());
  FaftFit f = fit_faft(FaftDesign(data.scores()), SurvivalSample::uncensored(y_imp));
  EXPECT_EQ(recover_beta(f, data.basis()), dr.beta_curve);
}

TEST_P(CausalReduction, DoubleRobustWithZeroResidualsIsRegAdjust) {
  const CausalDataset data = scenario_data(2, 0.2, 80 + GetParam());
  const CausalEstimate reg = estimate_reg_adjust(data);
  const Vector y_hat =
      reg_adjust_responses(reg.outcome_fit->params, data.scores(), data.covariates());
  Rng rng(GetParam());
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  Vector w(data.size());
  for (Index i = 0; i < w.size(); ++i) w(i) = unif(rng);
  const Vector y_tilde = dr_pseudo_outcomes(y_hat, y_hat, w);
  EXPECT_EQ(y_tilde, y_hat);
  FaftFit f = fit_faft(FaftDesign(data.scores()), SurvivalSample::uncensored(y_tilde));
  EXPECT_EQ(recover_beta(f, data.basis()), reg.beta_curve);
}

INSTANTIATE_TEST_SUITE_P(Seeds, CausalReduction, ::testing::Range(0, 4));

TEST(RegAdjust, ResponsesWithoutConfounderEffectAreFittedValues) {
  const CausalDataset data = scenario_data(1, 0.0, 7);
  FaftParams full = fit_outcome_model(data).params;
  full.gamma.setZero();
  const Vector y_hat = reg_adjust_responses(full, data.scores(), data.covariates());
  const FaftFit f = fit_faft(FaftDesign(data.scores()), SurvivalSample::uncensored(y_hat));
  EXPECT_LT((f.params.beta_scores - full.beta_scores).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(f.params.alpha, full.alpha, 1e-10);
}

TEST(RegAdjust, ResponsesAverageTheConfounderTerm) {
  FaftParams full = FaftParams::zeros(1, 2);
  full.alpha = 0.5;
  full.beta_scores(0) = 2.0;
  full.gamma << 1.0, -1.0;
  Matrix a(3, 1), z(3, 2);
  a << 1, 2, 3;
  z << 1, 0, 2, 0, 3, 3;
  // mean of gamma^T Z = (1 + 2 + 0) / 3 = 1.
  const Vector y = reg_adjust_responses(full, a, z);
  EXPECT_DOUBLE_EQ(y(0), 3.5);
  EXPECT_DOUBLE_EQ(y(1), 5.5);
  EXPECT_DOUBLE_EQ(y(2), 7.5);
}

TEST(Naive, ConsistentWithoutConfounding) {
  const CausalDataset data = unconfounded_data(11, 2000, false);
  const CausalEstimate est = estimate_naive(data);
  const Vector truth = true_beta(data.basis().grid);
  EXPECT_LE(rmse_beta(est.beta_curve, truth, data.basis().grid), 0.02);
}

TEST(Naive, NullEffect) {
  const CausalDataset data = unconfounded_data(12, 2000, true);
  const CausalEstimate est = estimate_naive(data);
  EXPECT_LE(inner_product(est.beta_curve, est.beta_curve, data.basis().grid), 0.05);
}

TEST(Estimators, AgreeWithoutConfounding) {
  const int reps = 50;
  double dist[6] = {0, 0, 0, 0, 0, 0};
  for (int r = 0; r < reps; ++r) {
    const CausalDataset data = unconfounded_data(derive_seed(300, {std::uint64_t(r)}), 2000, false);
    const Vector& grid = data.basis().grid;
    const Vector b[4] = {estimate_naive(data).beta_curve, estimate_reg_adjust(data).beta_curve,
                         estimate_fipw(data, WeightSpec::make_nonparametric()).beta_curve,
                         estimate_double_robust(data, WeightSpec::make_nonparametric()).beta_curve};
    int k = 0;
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) dist[k++] += std::sqrt(l2_sq(b[i], b[j], grid)) / reps;
    }
  }
  for (double d : dist) EXPECT_LE(d, 0.1);
}

TEST(Fipw, TrueWeightsRecoverCausalSlope) {
  // Z ~ N(0,1), A = xi Z + e with Var(e) = s2, Y = alpha + beta A + gamma Z + eps.
  const double xi = 0.5, s2 = 0.75, alpha = 1.0, beta = 1.0, gamma = 1.0;
  const Index n = 5000;
  Rng rng(2024);
  std::normal_distribution<double> norm;
  Matrix a(n, 1);
  Vector y(n), w(n);
  auto npdf = [](double x, double m, double v) {
    return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2.0 * std::numbers::pi * v);
  };
  const double var_a = xi * xi + s2;
  for (Index i = 0; i < n; ++i) {
    const double z = norm(rng);
    a(i, 0) = xi * z + std::sqrt(s2) * norm(rng);
    y(i) = alpha + beta * a(i, 0) + gamma * z + 0.5 * norm(rng);
    w(i) = npdf(a(i, 0), 0.0, var_a) / npdf(a(i, 0), xi * z, s2);
  }
  // Marginalization integral E[Y(a)] = int (alpha + beta a + gamma z) f(z) dz
  // by the trapezoid rule on [-10, 10]; slope from two treatment levels.
  auto mean_potential = [&](double level) {
    const int m = 4001;
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      const double z = -10.0 + 20.0 * j / (m - 1);
      const double f = (alpha + beta * level + gamma * z) * npdf(z, 0.0, 1.0);
      s += (j == 0 || j == m - 1 ? 0.5 : 1.0) * f;
    }
    return s * 20.0 / (m - 1);
  };
  const double oracle = mean_potential(1.0) - mean_potential(0.0);
  const FaftFit f = fit_faft(FaftDesign(a), SurvivalSample::uncensored(y), {}, w);
  EXPECT_NEAR(f.params.beta_scores(0), oracle, 0.05);
  // The unweighted slope absorbs the confounder path.
  const FaftFit naive = fit_faft(FaftDesign(a), SurvivalSample::uncensored(y));
  EXPECT_GT(std::abs(naive.params.beta_scores(0) - oracle), 0.2);
}

TEST(Dataset, Validation) {
  ScenarioConfig cfg;
  const SimulatedDataset d = generate_scenario(cfg);
  EXPECT_THROW(CausalDataset(d.treatment, d.covariates.topRows(10), d.survival), InvalidArgument);
  Matrix bad = d.covariates;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(CausalDataset(d.treatment, bad, d.survival), DataError);
  const CausalDataset none(d.treatment, Matrix(), d.survival);
  EXPECT_THROW(compute_weights(none, WeightSpec::make_nonparametric()), InvalidArgument);
}

TEST(Dataset, WeightBasisStandardized) {
  const CausalDataset data = scenario_data(2, 0.2, 5);
  const Matrix& a = data.weight_scores_standardized();
  const Matrix gram = a.transpose() * a / double(a.rows());
  EXPECT_LT((gram - Matrix::Identity(a.cols(), a.cols())).cwiseAbs().maxCoeff(), 1e-8);
  const Matrix z = data.covariates_standardized();
  const Matrix gz = z.transpose() * z / double(z.rows());
  EXPECT_LT((gz - Matrix::Identity(z.cols(), z.cols())).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Prediction, ReproducesFittedValuesInSample) {
  const CausalDataset data = scenario_data(1, 0.0, 9);
  const CausalEstimate est = estimate_naive(data);
  const Vector pred = predict_log_time(est, data.basis(), data.treatment().values());
  const Vector direct = est.fit.params.linear_predictor(FaftDesign(data.scores()));
  EXPECT_LT((pred - direct).cwiseAbs().maxCoeff(), 1e-10);
}
