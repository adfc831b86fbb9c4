#include "grwarm/theory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "grwarm/errors.hpp"
#include "grwarm/numerics.hpp"

namespace grwarm::theory {

namespace {

void check_params(const TheoryParams& p, bool allow_zero_gamma) {
  if (!std::isfinite(p.gamma) || p.gamma < 0.0 || (!allow_zero_gamma && p.gamma == 0.0)) {
    throw ParameterError(allow_zero_gamma ? "gamma must be finite and >= 0"
                                          : "gamma must be > 0 (use the gamma -> 0 limit)");
  }
  if (p.t < 1) throw ParameterError("t must be >= 1");
  if (!(p.sigma1 > 0.0) || !std::isfinite(p.sigma1)) throw ParameterError("sigma1 must be > 0");
}

// 1 - e^{-x} without cancellation.
double one_minus_exp_neg(double x) { return -std::expm1(-x); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

MomentPair moment_sums(const TheoryParams& p) {
  check_params(p, false);
  const auto t = static_cast<double>(p.t);
  const double mean = p.sigma1 * one_minus_exp_neg(p.gamma * t) / one_minus_exp_neg(p.gamma);
  const double var = 2.0 * p.sigma1 * p.sigma1 * one_minus_exp_neg(2.0 * p.gamma * t) /
                     one_minus_exp_neg(2.0 * p.gamma);
  return {mean, var};
}

double taylor_variance(double mean_y, double var_y) {
  if (!(mean_y > 0.0)) throw ParameterError("taylor_variance: mean must be > 0");
  if (!(var_y >= 0.0)) throw ParameterError("taylor_variance: variance must be >= 0");
  return var_y / (4.0 * mean_y * mean_y * mean_y);
}

double var_psi_limit_gamma_zero(std::int64_t t, double sigma1) {
  check_params({0.0, t, sigma1}, true);
  return 1.0 / (2.0 * sigma1 * static_cast<double>(t));
}

double var_psi_closed(const TheoryParams& p) {
  check_params(p, false);
  const auto t = static_cast<double>(p.t);
  const double g = p.gamma;
  if (g < kSmallGamma && g * t < 1e-4) {
    // Var * 2 sigma1 t = 1 + g (t-1)/2 + g^2 (2t^2 - 3t + 1)/12 + O((g t)^3)
    const double ratio = 1.0 + g * (t - 1.0) / 2.0 + g * g * (2.0 * t * t - 3.0 * t + 1.0) / 12.0;
    return ratio / (2.0 * p.sigma1 * t);
  }
  const double x = std::exp(-g);
  const double xt = std::exp(-g * t);
  const double one_minus_x = one_minus_exp_neg(g);
  const double one_minus_xt = one_minus_exp_neg(g * t);
  return t / (2.0 * p.sigma1) * (1.0 + xt) * one_minus_x * one_minus_x /
         ((1.0 + x) * one_minus_xt * one_minus_xt);
}

double var_psi_k_form(double k, std::int64_t t) {
  if (!(k > 0.0 && k < 1.0)) throw ParameterError("var_psi_k_form: k must lie in (0, 1)");
  if (t < 1) throw ParameterError("var_psi_k_form: t must be >= 1");
  const double kt = std::pow(k, static_cast<double>(t));
  const double one_minus_kt = -std::expm1(static_cast<double>(t) * std::log(k));
  return 0.5 * (1.0 + kt) * (1.0 - k) * (1.0 - k) / ((1.0 + k) * one_minus_kt * one_minus_kt);
}

Surface var_surface(const std::vector<double>& gamma_grid, const std::vector<std::int64_t>& t_grid,
                    double sigma1) {
  if (gamma_grid.empty() || t_grid.empty()) throw ParameterError("var_surface: empty grid");
  Surface s{gamma_grid, t_grid, {}};
  s.values.reserve(gamma_grid.size() * t_grid.size());
  for (double g : gamma_grid) {
    for (std::int64_t t : t_grid) s.values.push_back(var_psi_closed({g, t, sigma1}));
  }
  return s;
}

void write_surface_csv(std::ostream& out, const Surface& s) {
  out << "gamma\\t";
  for (std::int64_t t : s.steps) out << ',' << t;
  out << '\n';
  for (std::size_t i = 0; i < s.gammas.size(); ++i) {
    out << format_double(s.gammas[i]);
    for (std::size_t j = 0; j < s.steps.size(); ++j) out << ',' << format_double(s.at(i, j));
    out << '\n';
  }
}

Surface read_surface_csv(std::istream& in) {
  Surface s;
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("surface csv: missing header");
  {
    std::stringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');
    while (std::getline(header, cell, ',')) s.steps.push_back(std::stoll(cell));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    s.gammas.push_back(std::stod(cell));
    std::size_t cols = 0;
    while (std::getline(row, cell, ',')) {
      s.values.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != s.steps.size()) throw ParameterError("surface csv: ragged row");
  }
  return s;
}

double log_var_derivative(double x, std::int64_t t) {
  if (!(x > 0.0 && x < 1.0)) throw ParameterError("log_var_derivative: x must lie in (0, 1)");
  if (t < 1) throw ParameterError("log_var_derivative: t must be >= 1");
  const auto td = static_cast<double>(t);
  const double xt = std::pow(x, td);
  const double lead = td * std::pow(x, td - 1.0);
  return lead / (xt + 1.0) + 2.0 * lead / (1.0 - xt) - 1.0 / (1.0 + x) - 2.0 / (1.0 - x);
}

bool monotone_region(double gamma, std::int64_t t) {
  return static_cast<double>(t) * std::exp(-gamma * static_cast<double>(t - 1)) <= 1.0;
}

std::string_view to_string(PairStatus s) {
  switch (s) {
    case PairStatus::increasing:
      return "increasing";
    case PairStatus::flat:
      return "flat";
    case PairStatus::violation:
      return "violation";
  }
  return "unknown";
}

std::size_t MonotonicityReport::violations() const {
  return static_cast<std::size_t>(std::count_if(
      pairs.begin(), pairs.end(), [](const auto& p) { return p.status == PairStatus::violation; }));
}

std::size_t MonotonicityReport::flats() const {
  return static_cast<std::size_t>(std::count_if(
      pairs.begin(), pairs.end(), [](const auto& p) { return p.status == PairStatus::flat; }));
}

MonotonicityReport monotonicity_scan(std::int64_t t, const std::vector<double>& gamma_grid,
                                     double sigma1) {
  if (!std::is_sorted(gamma_grid.begin(), gamma_grid.end())) {
    throw ParameterError("monotonicity_scan: gamma grid must be ascending");
  }
  MonotonicityReport report{t, {}};
  constexpr double kTol = 4.0 * std::numeric_limits<double>::epsilon();
  for (std::size_t i = 0; i + 1 < gamma_grid.size(); ++i) {
    const double lo = gamma_grid[i];
    const double hi = gamma_grid[i + 1];
    if (!monotone_region(lo, t)) continue;
    const double v_lo = var_psi_closed({lo, t, sigma1});
    const double v_hi = var_psi_closed({hi, t, sigma1});
    PairStatus status;
    // At t = 1 the variance is 1/(2 sigma1) for every gamma.
    if (t == 1 || std::abs(v_hi - v_lo) <= kTol * std::max(v_lo, v_hi)) {
      status = PairStatus::flat;
    } else {
      status = v_hi > v_lo ? PairStatus::increasing : PairStatus::violation;
    }
    report.pairs.push_back({lo, hi, v_lo, v_hi, status});
  }
  return report;
}

std::string_view to_string(McMode m) {
  return m == McMode::sqrt_approx ? "sqrt_approx" : "adam_exact";
}

McMode parse_mc_mode(std::string_view name) {
  if (name == "sqrt_approx") return McMode::sqrt_approx;
  if (name == "adam_exact") return McMode::adam_exact;
  throw ParameterError("unknown Monte Carlo mode '" + std::string(name) + "'");
}

McEstimate mc_var_psi(const TheoryParams& p, std::int64_t n, std::uint64_t seed, McMode mode,
                      double beta2, unsigned workers) {
  check_params(p, true);
  if (n < 2) throw ParameterError("mc_var_psi: need n >= 2");
  if (mode == McMode::adam_exact && !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("mc_var_psi: beta2 must lie in [0, 1)");
  }

  const auto t = static_cast<std::size_t>(p.t);
  std::vector<double> sd(t);
  std::vector<double> weight(t, 1.0);
  for (std::size_t k = 0; k < t; ++k) {
    sd[k] = std::sqrt(p.sigma1 * std::exp(-p.gamma * static_cast<double>(k)));
    if (mode == McMode::adam_exact) {
      weight[k] = std::pow(beta2, static_cast<double>(t - 1 - k));
    }
  }
  const double numerator =
      mode == McMode::adam_exact
          ? -std::expm1(static_cast<double>(t) * std::log(beta2)) / (1.0 - beta2)
          : static_cast<double>(t);

  const std::int64_t chunks = (n + kMcChunk - 1) / kMcChunk;
  std::vector<double> stats(static_cast<std::size_t>(n));
  std::vector<std::int64_t> redraws(static_cast<std::size_t>(chunks), 0);

  auto run_chunk = [&](std::int64_t c) {
    Rng rng(seed, static_cast<std::uint64_t>(c));
    const std::int64_t begin = c * kMcChunk;
    const std::int64_t end = std::min(n, begin + kMcChunk);
    for (std::int64_t s = begin; s < end; ++s) {
      double sum = 0.0;
      for (;;) {
        sum = 0.0;
        for (std::size_t k = 0; k < t; ++k) {
          const double g = sd[k] * rng.normal();
          sum += weight[k] * g * g;
        }
        if (sum > 0.0) break;
        ++redraws[static_cast<std::size_t>(c)];
      }
      stats[static_cast<std::size_t>(s)] = std::sqrt(numerator / sum);
    }
  };

  unsigned pool = workers != 0 ? workers : std::max(1u, std::thread::hardware_concurrency());
  pool = static_cast<unsigned>(std::min<std::int64_t>(pool, chunks));
  if (pool <= 1) {
    for (std::int64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::jthread> threads;
    threads.reserve(pool);
    for (unsigned w = 0; w < pool; ++w) {
      threads.emplace_back([&] {
        for (std::int64_t c = next++; c < chunks; c = next++) run_chunk(c);
      });
    }
  }

  // Two-pass moments in index order.
  const auto nd = static_cast<double>(n);
  double sum = 0.0;
  for (double v : stats) sum += v;
  const double mean = sum / nd;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : stats) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  const double var = m2 / (nd - 1.0);
  const double central4 = m4 / nd;
  // Var(s^2) = (mu4 - sigma^4 (n-3)/(n-1)) / n, with sample moments plugged in.
  const double var_of_var = std::max(0.0, (central4 - var * var * (nd - 3.0) / (nd - 1.0)) / nd);

  McEstimate est;
  est.variance_hat = var;
  est.mean_hat = mean;
  est.n_samples = n;
  est.std_error = std::sqrt(var_of_var);
  est.mode = mode;
  est.seed = seed;
  est.resampled = std::accumulate(redraws.begin(), redraws.end(), std::int64_t{0});
  return est;
}

constexpr std::int64_t kExactProductLimit = 10'000'000;

double exact_var_constant_sigma(std::int64_t t, double sigma1) {
  if (t <= 2) {
    throw ParameterError("exact_var_constant_sigma: E[1/chi^2_t] exists only for t > 2");
  }
  if (!(sigma1 > 0.0)) throw ParameterError("exact_var_constant_sigma: sigma1 must be > 0");
  const auto td = static_cast<double>(t);
  // E[(chi^2_t)^{-1/2}]^2 = R_t^2 / 2 with R_t = Gamma((t-1)/2) / Gamma(t/2).
  // R_{t+2} = R_t (t-1)/t. The running product keeps the relative error near
  // sqrt(t) eps, which matters because the result cancels to O(1/t).
  double r2 = 0.0;
  if (t <= kExactProductLimit) {
    r2 = (t % 2 == 1) ? 4.0 / std::numbers::pi : std::numbers::pi / 4.0;
    for (std::int64_t k = (t % 2 == 1) ? 3 : 4; k < t; k += 2) {
      const auto kd = static_cast<double>(k);
      r2 *= ((kd - 1.0) / kd) * ((kd - 1.0) / kd);
    }
  } else {
    r2 = std::exp(2.0 * (std::lgamma((td - 1.0) / 2.0) - std::lgamma(td / 2.0)));
  }
  return td * (1.0 / (td - 2.0) - 0.5 * r2) / sigma1;
}

}  // namespace grwarm::theory
