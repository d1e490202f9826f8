#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fcs/fpca.hpp"
#include "fcs/random.hpp"
#include "fcs/sim.hpp"

using namespace fcs;

namespace {

constexpr double kPi = std::numbers::pi;

Vector sin_curve(const Vector& grid, double freq) {
  return (2.0 * kPi * freq * grid.array()).sin().matrix();
}

FunctionalSample single_factor_sample(Index n, Index m, std::uint64_t seed, Vector* a_out) {
  Rng rng(seed);
  std::normal_distribution<double> norm;
  const Vector grid = uniform_grid(m);
  const Vector phi = std::sqrt(2.0) * sin_curve(grid, 1.0);
  Matrix x(n, m);
  Vector a(n);
  for (Index i = 0; i < n; ++i) {
    a(i) = norm(rng);
    x.row(i) = a(i) * phi.transpose();
  }
  if (a_out) *a_out = a;
  return FunctionalSample(grid, x);
}

FunctionalSample random_sample(Index n, Index m, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> norm;
  const Vector grid = uniform_grid(m);
  Matrix x(n, m);
  for (Index i = 0; i < n; ++i) {
    Vector row = Vector::Zero(m);
    for (int k = 1; k <= 5; ++k) {
      row += (norm(rng) / double(k)) * sin_curve(grid, double(k));
    }
    x.row(i) = row.transpose();
  }
  return FunctionalSample(grid, x);
}

double sample_variance(const Vector& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / double(v.size() - 1);
}

}  // namespace

TEST(InnerProduct, ConstantOneIntegratesToOne) {
  const Vector grid = uniform_grid(101);
  const Vector one = Vector::Ones(101);
  EXPECT_DOUBLE_EQ(inner_product(one, one, grid), 1.0);
}

TEST(InnerProduct, SineSquaredIsOneHalf) {
  const Vector grid = uniform_grid(1001);
  const Vector f = sin_curve(grid, 1.0);
  EXPECT_NEAR(inner_product(f, f, grid), 0.5, 1e-5);
}

TEST(InnerProduct, SineCosineOrthogonal) {
  const Vector grid = uniform_grid(1001);
  const Vector f = sin_curve(grid, 1.0);
  const Vector g = (2.0 * kPi * grid.array()).cos().matrix();
  EXPECT_NEAR(inner_product(f, g, grid), 0.0, 1e-5);
}

TEST(InnerProduct, TrapezoidWeightsOnUnevenGrid) {
  Vector grid(4);
  grid << 0.0, 0.1, 0.5, 1.0;
  const Vector w = trapezoid_weights(grid);
  EXPECT_NEAR(w(0), 0.05, 1e-15);
  EXPECT_NEAR(w(1), 0.25, 1e-15);
  EXPECT_NEAR(w(2), 0.45, 1e-15);
  EXPECT_NEAR(w(3), 0.25, 1e-15);
  // Linear integrand is exact under the trapezoid rule.
  EXPECT_NEAR(inner_product(grid, Vector::Ones(4), grid), 0.5, 1e-15);
}

TEST(Fpca, SingleFactorRecoversEigenfunction) {
  Vector a;
  const FunctionalSample s = single_factor_sample(500, 201, 11, &a);
  for (double pve : {0.5, 0.9, 0.99}) {
    const FpcaResult r = estimate_fpca(s, pve);
    ASSERT_EQ(r.basis.num_components(), 1);
    const double var_a = sample_variance(a);
    EXPECT_NEAR(r.basis.eigenvalues(0), var_a, 0.15 * var_a);
    const Vector phi = std::sqrt(2.0) * sin_curve(s.grid(), 1.0);
    const Vector est = r.basis.eigenfunctions.col(0);
    const double sign = est.dot(phi) >= 0 ? 1.0 : -1.0;
    EXPECT_LT((sign * est - phi).cwiseAbs().maxCoeff(), 0.05);
  }
}

TEST(Fpca, FullRetentionCountsPositiveEigenvalues) {
  const FunctionalSample s = random_sample(40, 51, 3);
  const FpcaResult r = estimate_fpca(s, 1.0);
  EXPECT_DOUBLE_EQ(r.basis.pve_achieved, 1.0);
  const double floor = 1e-10 * r.basis.eigenvalues(0);
  EXPECT_EQ(r.basis.num_components(), (r.basis.all_eigenvalues.array() > floor).count());
}

TEST(Fpca, AllZeroSampleIsDegenerate) {
  const FunctionalSample s(uniform_grid(11), Matrix::Zero(5, 11));
  try {
    estimate_fpca(s, 0.9);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate sample"), std::string::npos);
  }
}

TEST(Fpca, RejectsPveOutsideUnitInterval) {
  const FunctionalSample s = random_sample(20, 21, 1);
  EXPECT_THROW(estimate_fpca(s, 0.0), InvalidArgument);
  EXPECT_THROW(estimate_fpca(s, 1.5), InvalidArgument);
}

TEST(Fpca, SimulationDesignTopEigenvalue) {
  ScenarioConfig cfg;
  cfg.n = 2000;
  cfg.censor_target = 0.0;
  cfg.dgp = DgpParams::literal();
  cfg.seed = 5;
  const SimulatedDataset d = generate_scenario(cfg);
  const FpcaResult r = estimate_fpca(d.treatment, 0.95);
  // Brute-force variance of the generated first score, rescaled from the raw
  // sin basis (L2 norm 1/sqrt 2) to the orthonormal one.
  const double var_a1 = sample_variance(d.scores.col(0)) * 0.5;
  EXPECT_NEAR(r.basis.eigenvalues(0), var_a1, 0.10 * var_a1);
}

TEST(StandardizeScores, DirectScaling) {
  FpcaBasis basis;
  basis.eigenvalues = (Vector(2) << 4.0, 1.0).finished();
  ScoreMatrix s;
  s.scores = (Matrix(1, 2) << 2.0, 3.0).finished();
  const ScoreMatrix out = standardize_scores(s, basis);
  EXPECT_DOUBLE_EQ(out.standardized(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out.standardized(0, 1), 3.0);
}

TEST(StandardizeScores, UnitEigenvaluesAreIdentity) {
  FpcaBasis basis;
  basis.eigenvalues = Vector::Ones(3);
  ScoreMatrix s;
  s.scores = Matrix::Random(5, 3);
  EXPECT_EQ(standardize_scores(s, basis).standardized, s.scores);
}

TEST(StandardizeScores, SimulationColumnsHaveUnitVariance) {
  ScenarioConfig cfg;
  cfg.n = 2000;
  cfg.censor_target = 0.0;
  cfg.seed = 8;
  const SimulatedDataset d = generate_scenario(cfg);
  const FpcaResult r = estimate_fpca(d.treatment, 0.95);
  const ScoreMatrix z = standardize_scores(r.scores, r.basis);
  for (Index k = 0; k < z.standardized.cols(); ++k) {
    const double v = sample_variance(z.standardized.col(k));
    EXPECT_GE(v, 0.9);
    EXPECT_LE(v, 1.1);
  }
}

TEST(StandardizeCovariates, WhiteColumnsNearlyUnchanged) {
  Rng rng(2);
  std::normal_distribution<double> norm;
  Matrix z(20000, 2);
  for (Index i = 0; i < z.rows(); ++i) {
    z(i, 0) = norm(rng);
    z(i, 1) = norm(rng);
  }
  const auto out = standardize_covariates(z);
  EXPECT_LT((out.gamma_z - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT((out.z_star - z).cwiseAbs().maxCoeff() / z.cwiseAbs().maxCoeff(), 0.05);
}

TEST(StandardizeCovariates, DuplicatedConstantColumnIsSingular) {
  const Matrix z = Matrix::Constant(10, 2, 3.0);
  EXPECT_THROW(standardize_covariates(z), DataError);
}

TEST(StandardizeCovariates, DiagonalSecondMoment) {
  // Rows (+-2, +-3) in all sign patterns: second moment diag(4, 9).
  Matrix z(4, 2);
  z << 2, 3, -2, 3, 2, -3, -2, -3;
  const auto out = standardize_covariates(z);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(out.z_star(i, 0), z(i, 0) / 2.0, 1e-14);
    EXPECT_NEAR(out.z_star(i, 1), z(i, 1) / 3.0, 1e-14);
  }
}

TEST(ReconstructCurve, UnitAndZeroCoefficients) {
  const FunctionalSample s = random_sample(60, 41, 4);
  const FpcaResult r = estimate_fpca(s, 0.99);
  const Index k = r.basis.num_components();
  Vector e1 = Vector::Zero(k);
  e1(0) = 1.0;
  EXPECT_EQ(reconstruct_curve(e1, r.basis), Vector(r.basis.eigenfunctions.col(0)));
  EXPECT_EQ(reconstruct_curve(Vector::Zero(k), r.basis), Vector::Zero(41));
  EXPECT_THROW(reconstruct_curve(Vector::Zero(k + 1), r.basis), InvalidArgument);
}

TEST(ReconstructCurve, RoundTripOnSpan) {
  const FunctionalSample s = random_sample(80, 61, 6);
  const FpcaResult r = estimate_fpca(s, 0.999);
  const Vector coeffs = Vector::LinSpaced(r.basis.num_components(), 1.0, -1.0);
  const Vector curve = r.basis.mean_curve + reconstruct_curve(coeffs, r.basis);
  const Matrix back = project_scores(r.basis, curve.transpose());
  EXPECT_LT((back.row(0).transpose() - coeffs).cwiseAbs().maxCoeff(), 1e-8);
  const Vector again = r.basis.mean_curve + reconstruct_curve(back.row(0).transpose(), r.basis);
  EXPECT_LT((again - curve).cwiseAbs().maxCoeff(), 1e-8);
}

// ---- properties -------------------------------------------------------------

class FpcaProperty : public ::testing::TestWithParam<int> {};

TEST_P(FpcaProperty, Orthonormality) {
  const FunctionalSample s = random_sample(50 + GetParam(), 31 + 7 * GetParam(), GetParam());
  const FpcaResult r = estimate_fpca(s, 0.999);
  const Matrix& phi = r.basis.eigenfunctions;
  const Matrix gram = phi.transpose() * r.basis.quadrature_weights.asDiagonal() * phi;
  const Index k = gram.rows();
  EXPECT_LE((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST_P(FpcaProperty, PveMonotonicity) {
  const FunctionalSample s = random_sample(60, 41, 100 + GetParam());
  Index prev = 0;
  for (double p : {0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0}) {
    const Index k = estimate_fpca(s, p).basis.num_components();
    EXPECT_LE(prev, k);
    prev = k;
  }
}

TEST_P(FpcaProperty, ReconstructionBudget) {
  const FunctionalSample s = random_sample(200, 81, 200 + GetParam());
  const FpcaResult full = estimate_fpca(s, 1.0);
  for (double p : {0.6, 0.8, 0.9}) {
    const FpcaResult r = estimate_fpca(s, p);
    const Index k = r.basis.num_components();
    const Matrix rec = (r.scores.scores * r.basis.eigenfunctions.transpose()).rowwise() +
                       r.basis.mean_curve.transpose();
    double err = 0.0;
    for (Index i = 0; i < s.size(); ++i) {
      const Vector d = s.values().row(i) - rec.row(i);
      err += inner_product(d, d, s.grid());
    }
    err /= double(s.size());
    const double discarded = full.basis.all_eigenvalues.tail(full.basis.all_eigenvalues.size() - k).sum();
    EXPECT_NEAR(err, discarded, 0.05 * discarded) << "pve " << p;
  }
}

TEST_P(FpcaProperty, SignConventionLargestEntryPositive) {
  const FunctionalSample s = random_sample(40, 31, 300 + GetParam());
  const FpcaResult r = estimate_fpca(s, 0.99);
  for (Index k = 0; k < r.basis.num_components(); ++k) {
    Index arg = 0;
    r.basis.eigenfunctions.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(r.basis.eigenfunctions(arg, k), 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, FpcaProperty, ::testing::Range(1, 6));
