#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "grwarm/errors.hpp"
#include "grwarm/io.hpp"
#include "grwarm/numerics.hpp"
#include "grwarm/objectives.hpp"
#include "grwarm/optim.hpp"
#include "grwarm/regularizer.hpp"
#include "grwarm/theory.hpp"

namespace grwarm::cli {

namespace {

using nlohmann::json;

/// Numeric failure or failed check; maps to exit code 2.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw ParameterError("grid count must be >= 1");
  if (count == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  }
  out.back() = hi;
  return out;
}

std::vector<std::int64_t> integer_grid(std::int64_t lo, std::int64_t hi, int count) {
  std::vector<std::int64_t> out;
  for (double v : linspace(static_cast<double>(lo), static_cast<double>(hi), count)) {
    const auto t = static_cast<std::int64_t>(std::llround(v));
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  return out;
}

void print_config(std::ostream& out, const json& cfg) { out << "config: " << cfg.dump() << '\n'; }

std::ofstream open_output(const std::string& path) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw NumericFailure("cannot open '" + path + "' for writing");
  return file;
}

// --- theory-surface -------------------------------------------------------

struct SurfaceArgs {
  double gamma_min = 0.01;
  double gamma_max = 1.0;
  int gamma_count = 50;
  std::int64_t t_min = 2;
  std::int64_t t_max = 200;
  int t_count = 50;
  double sigma1 = 1.0;
  std::string out;
};

int cmd_theory_surface(const SurfaceArgs& a, std::ostream& out) {
  if (!(a.gamma_min > 0.0) || a.gamma_max < a.gamma_min) {
    throw ParameterError("need 0 < gamma-min <= gamma-max");
  }
  if (a.t_min < 1 || a.t_max < a.t_min) throw ParameterError("need 1 <= t-min <= t-max");
  if (!(a.sigma1 > 0.0)) throw ParameterError("sigma1 must be > 0");
  print_config(out, {{"command", "theory-surface"},
                     {"gamma_min", a.gamma_min},
                     {"gamma_max", a.gamma_max},
                     {"gamma_count", a.gamma_count},
                     {"t_min", a.t_min},
                     {"t_max", a.t_max},
                     {"t_count", a.t_count},
                     {"sigma1", a.sigma1},
                     {"out", a.out}});
  const auto surface = theory::var_surface(linspace(a.gamma_min, a.gamma_max, a.gamma_count),
                                           integer_grid(a.t_min, a.t_max, a.t_count), a.sigma1);
  auto file = open_output(a.out);
  theory::write_surface_csv(file, surface);
  file.close();
  if (!file) throw NumericFailure("failed writing '" + a.out + "'");
  const auto [lo, hi] = std::minmax_element(surface.values.begin(), surface.values.end());
  out << "surface: " << surface.gammas.size() << " gammas x " << surface.steps.size()
      << " steps -> " << a.out << '\n';
  out << "min: " << format_number(*lo) << '\n' << "max: " << format_number(*hi) << '\n';
  return kExitOk;
}

// --- theory-mc --------------------------------------------------------------

struct McArgs {
  double gamma = 0.0;
  std::int64_t t = 10;
  double sigma1 = 1.0;
  std::int64_t n = 100000;
  std::uint64_t seed = 0;
  std::string mode = "sqrt_approx";
  double beta2 = 0.999;
  unsigned workers = 0;
  std::string out;
};

int cmd_theory_mc(const McArgs& a, std::ostream& out) {
  const auto mode = theory::parse_mc_mode(a.mode);
  const theory::TheoryParams p{a.gamma, a.t, a.sigma1};
  json cfg = {{"command", "theory-mc"}, {"gamma", a.gamma},   {"t", a.t},
              {"sigma1", a.sigma1},     {"n", a.n},           {"seed", a.seed},
              {"mode", a.mode},         {"beta2", a.beta2},   {"workers", a.workers}};
  if (!a.out.empty()) cfg["out"] = a.out;
  print_config(out, cfg);

  double reference = 0.0;
  std::string reference_kind;
  if (a.gamma > 0.0) {
    reference = theory::var_psi_closed(p);
    reference_kind = "closed_form";
  } else if (mode == theory::McMode::sqrt_approx) {
    reference = theory::exact_var_constant_sigma(a.t, a.sigma1);
    reference_kind = "exact_constant_sigma";
  } else {
    reference = theory::var_psi_limit_gamma_zero(a.t, a.sigma1);
    reference_kind = "gamma_zero_limit";
  }
  const auto est = theory::mc_var_psi(p, a.n, a.seed, mode, a.beta2, a.workers);
  const double gap = std::abs(est.variance_hat - reference) / reference;

  out << "mc_variance:  " << format_number(est.variance_hat) << '\n'
      << "std_error:    " << format_number(est.std_error) << '\n'
      << "reference:    " << format_number(reference) << " (" << reference_kind << ")\n"
      << "relative_gap: " << format_number(gap) << '\n';
  const json report = {{"mc_variance", est.variance_hat},
                       {"mc_mean", est.mean_hat},
                       {"closed_form", reference},
                       {"reference_kind", reference_kind},
                       {"relative_gap", gap},
                       {"std_error", est.std_error},
                       {"n", est.n_samples},
                       {"seed", est.seed},
                       {"mode", a.mode},
                       {"resampled", est.resampled}};
  const std::string text = report.dump(-1, ' ', false, json::error_handler_t::strict);
  out << "report: " << text << '\n';
  if (!a.out.empty()) {
    auto file = open_output(a.out);
    file << text << '\n';
  }
  return kExitOk;
}

// --- theory-mono ------------------------------------------------------------

struct MonoArgs {
  std::vector<std::int64_t> t_values = {5, 10, 100, 1000};
  double gamma_min = 0.01;
  double gamma_max = 3.0;
  int gamma_count = 300;
  double sigma1 = 1.0;
};

int cmd_theory_mono(const MonoArgs& a, std::ostream& out) {
  print_config(out, {{"command", "theory-mono"},
                     {"t", a.t_values},
                     {"gamma_min", a.gamma_min},
                     {"gamma_max", a.gamma_max},
                     {"gamma_count", a.gamma_count},
                     {"sigma1", a.sigma1}});
  if (!(a.gamma_min > 0.0) || a.gamma_max < a.gamma_min) {
    throw ParameterError("need 0 < gamma-min <= gamma-max");
  }
  const auto grid = linspace(a.gamma_min, a.gamma_max, a.gamma_count);
  std::size_t bad = 0;
  for (std::int64_t t : a.t_values) {
    const auto report = theory::monotonicity_scan(t, grid, a.sigma1);
    std::size_t positive_derivative = 0;
    for (const auto& pair : report.pairs) {
      if (t >= 2 && theory::log_var_derivative(std::exp(-pair.gamma_lo), t) >= 0.0) {
        ++positive_derivative;
      }
    }
    out << "t=" << t << " pairs=" << report.pairs.size() << " increasing="
        << report.pairs.size() - report.violations() - report.flats()
        << " flat=" << report.flats() << " violations=" << report.violations()
        << " nonnegative_log_derivative=" << positive_derivative << '\n';
    bad += report.violations() + positive_derivative;
  }
  if (bad != 0) throw NumericFailure("monotonicity check failed");
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  std::ifstream in(a.config);
  if (!in) throw ConfigError("cannot read config '" + a.config + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const RunConfig cfg = parse_run_config(doc);
  print_config(out, to_json(cfg));
  if (cfg.train.schedule.gr.extrapolates()) {
    err << "warning: lambda0/r0 > 1 extrapolates beyond the perturbed gradient\n";
  }

  const Experiment ex = make_experiment(cfg);
  const TrainResult result = train(cfg.train, *ex.objective, ex.data, ex.theta0);

  auto file = open_output(a.out);
  write_trace(file, result.records);
  file.close();
  if (!file) throw NumericFailure("failed writing '" + a.out + "'");

  double warm_sum = 0.0;
  std::size_t warm_count = 0;
  for (const auto& rec : result.records) {
    if (rec.step <= cfg.train.schedule.warmup_steps) {
      warm_sum += rec.grad_norm;
      ++warm_count;
    }
  }
  out << "steps: " << result.records.size() << '\n';
  if (!result.records.empty()) {
    out << "final_loss: " << format_number(result.records.back().loss) << '\n';
  }
  if (!result.diverged) {
    if (auto e = ex.objective->error_rate(result.theta, ex.data)) {
      out << "final_eval_error: " << format_number(*e) << '\n';
    }
  }
  out << "mean_grad_norm_warmup: "
      << format_number(warm_count ? warm_sum / static_cast<double>(warm_count) : 0.0) << '\n';
  if (result.diverged) throw NumericFailure("training diverged: " + result.diagnostic);
  return kExitOk;
}

// --- gradcheck --------------------------------------------------------------

struct GradcheckArgs {
  std::string model = "quadratic";
  std::uint64_t seed = 0;
  double h = 1e-5;
  std::vector<double> r_list = {0.4, 0.2, 0.1, 0.05};
  double lambda = 0.1;
};

double relative_error(const RealVector& got, const RealVector& want) {
  return l2_norm(got - want) / l2_norm(want);
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (!(a.h > 0.0)) throw ParameterError("h must be > 0");
  if (a.r_list.empty()) throw ParameterError("r-list must not be empty");
  for (double r : a.r_list) {
    if (!(r > 0.0)) throw ParameterError("every r must be > 0");
  }
  if (!(a.lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
  print_config(out, {{"command", "gradcheck"},
                     {"model", a.model},
                     {"seed", a.seed},
                     {"h", a.h},
                     {"r_list", a.r_list},
                     {"lambda", a.lambda}});

  if (a.model == "quadratic") {
    const auto q = QuadraticObjective::random(10, 0.1, 10.0, a.seed);
    Rng rng(a.seed, 1);
    RealVector theta(10);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
    const RealVector exact = q.gr_exact_grad(theta, a.lambda);
    const Dataset empty;
    double worst = 0.0;
    for (double r : a.r_list) {
      const double e = relative_error(gr_gradient(q, theta, empty, a.lambda, r), exact);
      worst = std::max(worst, e);
      out << "r=" << format_number(r) << " rel_error=" << format_number(e) << '\n';
    }
    out << "max_rel_error: " << format_number(worst) << '\n';
    if (!(worst < 1e-12)) throw NumericFailure("GR gradient is not exact on the quadratic");
    return kExitOk;
  }
  if (a.model == "mlp") {
    const Dataset data = synth_dataset(DatasetKind::spirals, 60, 3, a.seed);
    const MlpClassifier mlp({2, 16, 3}, Activation::tanh);
    const RealVector theta = mlp.init_params(a.seed);
    const RealVector reference = finite_diff_grad(
        [&](const RealVector& p) { return penalized_loss(mlp, p, data, a.lambda); }, theta, a.h);
    double previous = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    for (double r : a.r_list) {
      const double e = relative_error(gr_gradient(mlp, theta, data, a.lambda, r), reference);
      out << "r=" << format_number(r) << " rel_error=" << format_number(e) << '\n';
      decreasing = decreasing && e < previous;
      previous = e;
    }
    if (!decreasing) throw NumericFailure("approximation error is not strictly decreasing");
    return kExitOk;
  }
  throw ParameterError("model must be 'quadratic' or 'mlp'");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-regularized adaptive optimization: theory and training tools", "grwarm"};
  app.require_subcommand(1);

  SurfaceArgs surface;
  auto* s = app.add_subcommand("theory-surface", "Write the Var(psi) surface over (gamma, t) as CSV");
  s->add_option("--gamma-min", surface.gamma_min, "Smallest decay coefficient")->capture_default_str();
  s->add_option("--gamma-max", surface.gamma_max, "Largest decay coefficient")->capture_default_str();
  s->add_option("--gamma-count", surface.gamma_count, "Number of gamma values")->capture_default_str();
  s->add_option("--t-min", surface.t_min, "Smallest step")->capture_default_str();
  s->add_option("--t-max", surface.t_max, "Largest step")->capture_default_str();
  s->add_option("--t-count", surface.t_count, "Number of step values")->capture_default_str();
  s->add_option("--sigma1", surface.sigma1, "Variance of the first gradient")->capture_default_str();
  s->add_option("--out", surface.out, "Output CSV path")->required();

  McArgs mc;
  auto* m = app.add_subcommand("theory-mc", "Monte Carlo estimate of Var(psi) against the closed form");
  m->add_option("--gamma", mc.gamma, "Decay coefficient (>= 0)")->required();
  m->add_option("--t", mc.t, "Number of steps")->capture_default_str();
  m->add_option("--sigma1", mc.sigma1, "Variance of the first gradient")->capture_default_str();
  m->add_option("--n", mc.n, "Number of sampled sequences")->capture_default_str();
  m->add_option("--seed", mc.seed, "RNG seed")->required();
  m->add_option("--mode", mc.mode, "sqrt_approx or adam_exact")->capture_default_str();
  m->add_option("--beta2", mc.beta2, "beta2 for adam_exact")->capture_default_str();
  m->add_option("--workers", mc.workers, "Worker threads (0 = hardware)")->capture_default_str();
  m->add_option("--out", mc.out, "Optional JSON report path");

  MonoArgs mono;
  auto* mo = app.add_subcommand("theory-mono", "Check that Var(psi) increases with gamma");
  mo->add_option("--t", mono.t_values, "Step counts to scan")->capture_default_str();
  mo->add_option("--gamma-min", mono.gamma_min)->capture_default_str();
  mo->add_option("--gamma-max", mono.gamma_max)->capture_default_str();
  mo->add_option("--gamma-count", mono.gamma_count)->capture_default_str();
  mo->add_option("--sigma1", mono.sigma1)->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train with a GR warmup policy and write a JSONL trace");
  t->add_option("--config", tr.config, "Run configuration (JSON)")->required();
  t->add_option("--out", tr.out, "Trace output path (JSONL)")->required();

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare GR gradients with exact or finite-difference references");
  g->add_option("--model", gc.model, "quadratic or mlp")->capture_default_str();
  g->add_option("--seed", gc.seed, "RNG seed")->required();
  g->set_help_flag("--help", "Print this help message and exit");
  g->add_option("--h", gc.h, "Finite-difference step")->capture_default_str();
  g->add_option("--r-list", gc.r_list, "Radii, comma separated")->delimiter(',')->capture_default_str();
  g->add_option("--lambda", gc.lambda, "Regularization degree")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_theory_surface(surface, out);
    if (m->parsed()) return cmd_theory_mc(mc, out);
    if (mo->parsed()) return cmd_theory_mono(mono, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (g->parsed()) return cmd_gradcheck(gc, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace grwarm::cli
