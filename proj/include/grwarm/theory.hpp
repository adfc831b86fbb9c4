#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace grwarm::theory {

/// Gradient model g_k ~ N(0, sigma_k), k = 1..t, with per-step variance
/// sigma_k = exp(-gamma (k - 1)) sigma1. The first step carries variance
/// sigma1; this indexing is what the closed-form geometric sums below assume.
struct TheoryParams {
  double gamma = 0.0;
  std::int64_t t = 1;
  double sigma1 = 1.0;
};

/// Mean and variance of t*Y = sum_k g_k^2.
struct MomentPair {
  double mean_tY;
  double var_tY;
};

/// mean = sigma1 (1 - e^{-gamma t}) / (1 - e^{-gamma}),
/// var  = 2 sigma1^2 (1 - e^{-2 gamma t}) / (1 - e^{-2 gamma}). Requires gamma > 0.
MomentPair moment_sums(const TheoryParams& p);

/// Delta-method variance of 1/sqrt(Y): var_Y / (4 mean_Y^3).
double taylor_variance(double mean_y, double var_y);

/// Closed-form Var(psi):
///   t/(2 sigma1) * (1 + e^{-gamma t})(1 - e^{-gamma})^2 / ((1 + e^{-gamma})(1 - e^{-gamma t})^2).
/// Requires gamma > 0. Below kSmallGamma (and for gamma*t small) a second-order
/// series in gamma is used; elsewhere the (1 - e^{-x}) factors go through expm1.
double var_psi_closed(const TheoryParams& p);

/// gamma -> 0 limit of var_psi_closed: 1 / (2 sigma1 t).
double var_psi_limit_gamma_zero(std::int64_t t, double sigma1);

inline constexpr double kSmallGamma = 1e-6;

/// Same quantity with x = k = e^{-gamma} and sigma1 = t:
/// 1/2 (1 + k^t)(1 - k)^2 / ((1 + k)(1 - k^t)^2).
double var_psi_k_form(double k, std::int64_t t);

/// Variance over a (gamma, t) grid. values[i * t_grid.size() + j] = Var(gamma_i, t_j).
struct Surface {
  std::vector<double> gammas;
  std::vector<std::int64_t> steps;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * steps.size() + j]; }
};

Surface var_surface(const std::vector<double>& gamma_grid, const std::vector<std::int64_t>& t_grid,
                    double sigma1);

/// Header row "gamma\t,t_1,...", then one row per gamma with the variances.
void write_surface_csv(std::ostream& out, const Surface& s);
Surface read_surface_csv(std::istream& in);

/// d/dx log Var at x = e^{-gamma}:
///   t x^{t-1}/(x^t + 1) + 2 t x^{t-1}/(1 - x^t) - 1/(1 + x) - 2/(1 - x).
double log_var_derivative(double x, std::int64_t t);

/// True when t e^{-gamma (t-1)} <= 1, the region where Var grows with gamma.
bool monotone_region(double gamma, std::int64_t t);

enum class PairStatus { increasing, flat, violation };
std::string_view to_string(PairStatus s);

struct MonotonicityPair {
  double gamma_lo;
  double gamma_hi;
  double var_lo;
  double var_hi;
  PairStatus status;
};

struct MonotonicityReport {
  std::int64_t t;
  std::vector<MonotonicityPair> pairs;  // only pairs whose smaller gamma is in the region
  std::size_t violations() const;
  std::size_t flats() const;
};

/// Checks adjacent pairs of an ascending gamma grid.
MonotonicityReport monotonicity_scan(std::int64_t t, const std::vector<double>& gamma_grid,
                                     double sigma1);

enum class McMode { sqrt_approx, adam_exact };
std::string_view to_string(McMode m);
McMode parse_mc_mode(std::string_view name);

struct McEstimate {
  double variance_hat = 0.0;
  double mean_hat = 0.0;
  std::int64_t n_samples = 0;
  double std_error = 0.0;  // standard error of variance_hat
  McMode mode = McMode::sqrt_approx;
  std::uint64_t seed = 0;
  std::int64_t resampled = 0;  // sequences redrawn because sum g^2 was 0

  friend bool operator==(const McEstimate&, const McEstimate&) = default;
};

/// Samples per independent RNG stream in mc_var_psi.
inline constexpr std::int64_t kMcChunk = 4096;

/// Monte Carlo variance of psi over n independent gradient sequences.
///
/// sqrt_approx evaluates sqrt(t / sum g_k^2); adam_exact evaluates the
/// beta2-weighted adaptive learning rate. gamma = 0 is admitted. Chunk c of
/// kMcChunk samples draws from Rng(seed, c) and results are reduced in chunk
/// order, so the estimate does not depend on `workers`.
McEstimate mc_var_psi(const TheoryParams& p, std::int64_t n, std::uint64_t seed, McMode mode,
                      double beta2 = 0.999, unsigned workers = 0);

/// Exact Var(sqrt(t / X)) for X = sigma1 chi^2_t (the gamma = 0 case):
///   t (1/(t-2) - (Gamma((t-1)/2) / (sqrt(2) Gamma(t/2)))^2) / sigma1. Requires t >= 3.
double exact_var_constant_sigma(std::int64_t t, double sigma1);

}  // namespace grwarm::theory
