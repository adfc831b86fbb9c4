#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "grwarm/errors.hpp"
#include "grwarm/numerics.hpp"
#include "grwarm/theory.hpp"

namespace grwarm::theory {
namespace {

const double kLn2 = std::numbers::ln2;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

TEST(MomentSumsTest, Examples) {
  const auto m = moment_sums({kLn2, 2, 1.0});
  EXPECT_NEAR(m.mean_tY, 1.5, 1e-15);
  EXPECT_NEAR(m.var_tY, 2.5, 1e-15);

  const auto one = moment_sums({0.7, 1, 3.0});
  EXPECT_NEAR(one.mean_tY, 3.0, 1e-15);
  EXPECT_NEAR(one.var_tY, 18.0, 1e-14);

  const auto big = moment_sums({0.3, 100000, 2.0});
  EXPECT_NEAR(big.mean_tY, 2.0 / (1.0 - std::exp(-0.3)), 1e-12);

  EXPECT_THROW(moment_sums({0.0, 3, 1.0}), ParameterError);
  EXPECT_THROW(moment_sums({-1.0, 3, 1.0}), ParameterError);
}

TEST(MomentSumsTest, MatchesExplicitSums) {
  // Direct summation of sigma_k = e^{-gamma (k-1)} sigma1 and 2 sigma_k^2.
  for (double gamma : {0.01, 0.2, 1.5}) {
    for (std::int64_t t : {1, 2, 7, 300}) {
      double mean = 0.0;
      double var = 0.0;
      for (std::int64_t k = 1; k <= t; ++k) {
        const double s = 1.7 * std::exp(-gamma * static_cast<double>(k - 1));
        mean += s;
        var += 2.0 * s * s;
      }
      const auto m = moment_sums({gamma, t, 1.7});
      EXPECT_LT(rel(m.mean_tY, mean), 1e-12);
      EXPECT_LT(rel(m.var_tY, var), 1e-12);
    }
  }
}

TEST(TaylorVarianceTest, Examples) {
  EXPECT_EQ(taylor_variance(2.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(taylor_variance(1.0, 4.0), 1.0);
  EXPECT_NEAR(taylor_variance(0.75, 0.625), 10.0 / 27.0, 1e-15);
  EXPECT_THROW(taylor_variance(0.0, 1.0), ParameterError);
  EXPECT_THROW(taylor_variance(-1.0, 1.0), ParameterError);
}

TEST(VarPsiClosedTest, Examples) {
  EXPECT_NEAR(var_psi_closed({kLn2, 2, 1.0}), 10.0 / 27.0, 1e-15);
  for (double gamma : {0.01, 0.5, 2.0}) {
    EXPECT_NEAR(var_psi_closed({gamma, 40, 2.0}), 0.5 * var_psi_closed({gamma, 40, 1.0}),
                1e-15 * var_psi_closed({gamma, 40, 1.0}));
  }
  EXPECT_NEAR(var_psi_closed({1e-8, 100, 1.0}), 0.005000002475000821, 1e-15);
  EXPECT_EQ(var_psi_limit_gamma_zero(100, 1.0), 0.005);
  EXPECT_THROW(var_psi_closed({0.0, 10, 1.0}), ParameterError);
}

TEST(VarPsiClosedTest, SeriesAndDirectPathsAgree) {
  // Just below and above the series cutoff, against high-precision values.
  EXPECT_LT(rel(var_psi_closed({0.999999e-6, 50, 1.0}), 0.010000245003797541936), 1e-13);
  EXPECT_LT(rel(var_psi_closed({1.000001e-6, 50, 1.0}), 0.010000245004287558106), 1e-13);
  EXPECT_LT(rel(var_psi_closed({0.999999e-6, 10, 1.0}), 0.050000225000487500262), 1e-13);
  EXPECT_LT(rel(var_psi_closed({1.000001e-6, 10, 1.0}), 0.050000225000937503113), 1e-13);
}

TEST(VarPsiClosedTest, PipelineIdentity) {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const double gamma = std::pow(10.0, -3.0 + 3.5 * rng.uniform());
    const auto t = static_cast<std::int64_t>(2 + rng.uniform_index(10000));
    const double sigma1 = 0.1 + 9.9 * rng.uniform();
    const auto m = moment_sums({gamma, t, sigma1});
    const auto td = static_cast<double>(t);
    const double pipeline = taylor_variance(m.mean_tY / td, m.var_tY / (td * td));
    EXPECT_LT(rel(pipeline, var_psi_closed({gamma, t, sigma1})), 1e-12)
        << gamma << " " << t << " " << sigma1;
  }
}

TEST(VarPsiKFormTest, Examples) {
  EXPECT_NEAR(var_psi_k_form(0.5, 2), 5.0 / 27.0, 1e-15);
  EXPECT_NEAR(var_psi_k_form(1.0 - 1e-9, 20), 1.0 / 800.0, 1e-10);
  EXPECT_THROW(var_psi_k_form(1.0, 3), ParameterError);
  EXPECT_THROW(var_psi_k_form(0.0, 3), ParameterError);
}

TEST(VarPsiKFormTest, ParameterizationIdentity) {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const double k = 0.001 + 0.998 * rng.uniform();
    const auto t = static_cast<std::int64_t>(1 + rng.uniform_index(2000));
    EXPECT_LT(rel(var_psi_k_form(k, t), var_psi_closed({-std::log(k), t, static_cast<double>(t)})),
              1e-12);
  }
}

TEST(SurfaceTest, ShapeAndCells) {
  const std::vector<double> gammas{0.1, 0.2, 0.5};
  const std::vector<std::int64_t> steps{2, 10, 50, 100};
  const auto s = var_surface(gammas, steps, 1.5);
  ASSERT_EQ(s.values.size(), 12u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(s.at(i, j), var_psi_closed({gammas[i], steps[j], 1.5}));
    }
  }
  const auto single = var_surface({0.3}, {7}, 1.0);
  EXPECT_EQ(single.values.at(0), var_psi_closed({0.3, 7, 1.0}));
  EXPECT_THROW(var_surface({}, {2}, 1.0), ParameterError);
  EXPECT_THROW(var_surface({-0.1}, {2}, 1.0), ParameterError);
}

TEST(SurfaceTest, IncreasingInGammaInsideRegion) {
  std::vector<double> gammas;
  for (int i = 1; i <= 100; ++i) gammas.push_back(0.02 * i);
  const std::vector<std::int64_t> steps{2, 5, 20, 200};
  const auto s = var_surface(gammas, steps, 1.0);
  for (std::size_t j = 0; j < steps.size(); ++j) {
    for (std::size_t i = 0; i + 1 < gammas.size(); ++i) {
      if (monotone_region(gammas[i], steps[j])) {
        EXPECT_LT(s.at(i, j), s.at(i + 1, j)) << gammas[i] << " t=" << steps[j];
      }
    }
  }
}

TEST(SurfaceTest, CsvRoundTrip) {
  const auto s = var_surface({0.01, 0.123456789, 1.0}, {2, 3, 200}, 0.7);
  std::stringstream ss;
  write_surface_csv(ss, s);
  const auto back = read_surface_csv(ss);
  EXPECT_EQ(back.gammas, s.gammas);
  EXPECT_EQ(back.steps, s.steps);
  EXPECT_EQ(back.values, s.values);
}

TEST(LogVarDerivativeTest, Examples) {
  for (double x : {0.1, 0.5, 0.9}) EXPECT_NEAR(log_var_derivative(x, 1), 0.0, 1e-13);
  EXPECT_NEAR(log_var_derivative(0.5, 10), -4.6080537872827409, 1e-13);
  EXPECT_THROW(log_var_derivative(1.0, 3), ParameterError);
  EXPECT_THROW(log_var_derivative(0.0, 3), ParameterError);
}

TEST(LogVarDerivativeTest, MatchesFiniteDifferenceOfLogVariance) {
  for (std::int64_t t : {2, 5, 10, 100, 1000}) {
    for (double x : {0.05, 0.3, 0.6, 0.9, 0.99}) {
      const double h = 1e-6 * std::min(x, 1.0 - x);
      auto log_var = [&](double y) { return std::log(var_psi_closed({-std::log(y), t, 1.0})); };
      const double fd = (log_var(x + h) - log_var(x - h)) / (2 * h);
      const double exact = log_var_derivative(x, t);
      if (std::abs(exact) < 1e-6) continue;
      EXPECT_LT(rel(fd, exact), 1e-6) << "t=" << t << " x=" << x;
    }
  }
}

TEST(MonotonicityScanTest, Examples) {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(0.1 * i);
  const auto r100 = monotonicity_scan(100, grid, 1.0);
  EXPECT_EQ(r100.pairs.size(), 9u);
  EXPECT_EQ(r100.violations(), 0u);
  EXPECT_EQ(r100.flats(), 0u);

  const auto r1 = monotonicity_scan(1, grid, 1.0);
  EXPECT_EQ(r1.flats(), r1.pairs.size());
  EXPECT_EQ(r1.violations(), 0u);

  const auto empty = monotonicity_scan(100, {0.01, 0.02, 0.03}, 1.0);
  EXPECT_TRUE(empty.pairs.empty());

  EXPECT_THROW(monotonicity_scan(10, {0.5, 0.1}, 1.0), ParameterError);
}

TEST(ExactVarConstantSigmaTest, Examples) {
  EXPECT_NEAR(exact_var_constant_sigma(10, 1.0), 0.075545959275055933, 1e-14);
  EXPECT_NEAR(exact_var_constant_sigma(10, 2.0), 0.5 * exact_var_constant_sigma(10, 1.0), 1e-16);
  const double ratio = exact_var_constant_sigma(1000, 1.0) * 2.0 * 1000.0;
  EXPECT_NEAR(ratio, 1.0037604001342049, 1e-9);
  EXPECT_NEAR(exact_var_constant_sigma(100000, 1.0) * 2.0 * 100000.0, 1.0, 1e-4);
  EXPECT_THROW(exact_var_constant_sigma(2, 1.0), ParameterError);
}

TEST(McVarPsiTest, BitwiseDeterministicAndWorkerIndependent) {
  const TheoryParams p{0.05, 30, 1.0};
  const auto a = mc_var_psi(p, 20000, 7, McMode::sqrt_approx, 0.999, 1);
  const auto b = mc_var_psi(p, 20000, 7, McMode::sqrt_approx, 0.999, 1);
  const auto c = mc_var_psi(p, 20000, 7, McMode::sqrt_approx, 0.999, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  const auto d = mc_var_psi(p, 20000, 8, McMode::sqrt_approx, 0.999, 1);
  EXPECT_NE(a.variance_hat, d.variance_hat);
}

TEST(McVarPsiTest, StdErrorShrinksWithSquareRootOfN) {
  const TheoryParams p{0.02, 50, 1.0};
  const auto small = mc_var_psi(p, 50000, 3, McMode::sqrt_approx);
  const auto large = mc_var_psi(p, 200000, 3, McMode::sqrt_approx);
  EXPECT_NEAR(large.std_error / small.std_error, 0.5, 0.05);
}

TEST(McVarPsiTest, ConstantSigmaMatchesExactOracle) {
  const auto est = mc_var_psi({0.0, 10, 1.0}, 200000, 11, McMode::sqrt_approx);
  EXPECT_LT(std::abs(est.variance_hat - exact_var_constant_sigma(10, 1.0)), 3 * est.std_error);
  EXPECT_EQ(est.resampled, 0);
}

TEST(McVarPsiTest, AdamExactCloseToSqrtApprox) {
  for (const TheoryParams p : {TheoryParams{0.0, 50, 1.0}, TheoryParams{0.01, 100, 1.0},
                               TheoryParams{0.05, 20, 2.0}}) {
    const auto s = mc_var_psi(p, 100000, 5, McMode::sqrt_approx);
    const auto a = mc_var_psi(p, 100000, 5, McMode::adam_exact, 0.999);
    EXPECT_LT(rel(a.variance_hat, s.variance_hat), 0.15) << p.gamma << " " << p.t;
  }
}

TEST(McVarPsiTest, RejectsBadArguments) {
  EXPECT_THROW(mc_var_psi({0.1, 10, 1.0}, 1, 0, McMode::sqrt_approx), ParameterError);
  EXPECT_THROW(mc_var_psi({-0.1, 10, 1.0}, 100, 0, McMode::sqrt_approx), ParameterError);
  EXPECT_THROW(mc_var_psi({0.1, 10, 1.0}, 100, 0, McMode::adam_exact, 1.0), ParameterError);
  EXPECT_THROW(parse_mc_mode("exact"), ParameterError);
}

}  // namespace
}  // namespace grwarm::theory
