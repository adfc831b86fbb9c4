#include "grwarm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "grwarm/errors.hpp"

namespace grwarm {

namespace {

void check_beta(double beta, const char* name) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw ParameterError(std::string(name) + " must lie in [0, 1)");
  }
}

void check_step_inputs(const RealVector& theta, const RealVector& g, std::size_t state_dim,
                       double lr) {
  if (theta.size() != g.size() || theta.size() != state_dim) {
    throw DimensionError("optimizer step: theta, gradient and state sizes differ");
  }
  if (!g.all_finite()) throw NumericError("optimizer step: non-finite gradient");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("optimizer step: lr must be > 0");
}

double warmup_fraction(std::int64_t t, std::int64_t warmup_steps) {
  if (t >= warmup_steps) return 1.0;
  return static_cast<double>(t) / static_cast<double>(warmup_steps);
}

}  // namespace

double momentum_phi(std::span<const double> history, double beta1) {
  if (history.empty()) throw ParameterError("momentum_phi: empty gradient history");
  check_beta(beta1, "beta1");
  const auto t = static_cast<double>(history.size());
  double sum = 0.0;
  double weight = 1.0;  // beta1^(t-i), walking backwards from i = t
  for (std::size_t k = history.size(); k-- > 0;) {
    sum += weight * history[k];
    weight *= beta1;
  }
  return (1.0 - beta1) * sum / (1.0 - std::pow(beta1, t));
}

double adaptive_lr_psi(std::span<const double> history, double beta2) {
  if (history.empty()) throw ParameterError("adaptive_lr_psi: empty gradient history");
  check_beta(beta2, "beta2");
  const auto t = static_cast<double>(history.size());
  double sum = 0.0;
  double weight = 1.0;
  for (std::size_t k = history.size(); k-- > 0;) {
    sum += weight * history[k] * history[k];
    weight *= beta2;
  }
  if (sum == 0.0) throw NumericError("adaptive_lr_psi: all gradients are zero, psi diverges");
  return std::sqrt((1.0 - std::pow(beta2, t)) / ((1.0 - beta2) * sum));
}

void AdamHyper::validate() const {
  check_beta(beta1, "beta1");
  check_beta(beta2, "beta2");
  if (!(eps > 0.0)) throw ParameterError("adam: eps must be > 0");
}

AdamState::AdamState(std::size_t dim, AdamHyper h) : m(dim), v(dim), hyper(h) {
  hyper.validate();
}

double AdamState::phi(std::size_t i) const {
  if (t == 0) throw ParameterError("AdamState::phi: no steps taken");
  return m[i] / (1.0 - std::pow(hyper.beta1, static_cast<double>(t)));
}

double AdamState::psi(std::size_t i) const {
  if (t == 0) throw ParameterError("AdamState::psi: no steps taken");
  if (v[i] == 0.0) throw NumericError("AdamState::psi: zero second moment");
  return std::sqrt((1.0 - std::pow(hyper.beta2, static_cast<double>(t))) / v[i]);
}

void adam_step(AdamState& state, RealVector& theta, const RealVector& g, double lr) {
  check_step_inputs(theta, g, state.m.size(), lr);
  const auto& h = state.hyper;
  const auto next_t = static_cast<double>(state.t + 1);
  const double bc1 = 1.0 - std::pow(h.beta1, next_t);
  const double bc2 = 1.0 - std::pow(h.beta2, next_t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g[i];
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
  ++state.t;
}

void RmsPropHyper::validate() const {
  check_beta(decay, "decay");
  if (!(eps > 0.0)) throw ParameterError("rmsprop: eps must be > 0");
}

RmsPropState::RmsPropState(std::size_t dim, RmsPropHyper h) : v(dim), hyper(h) {
  hyper.validate();
}

void rmsprop_step(RmsPropState& state, RealVector& theta, const RealVector& g, double lr) {
  check_step_inputs(theta, g, state.v.size(), lr);
  const auto& h = state.hyper;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.v[i] = h.decay * state.v[i] + (1.0 - h.decay) * g[i] * g[i];
    theta[i] -= lr * g[i] / (std::sqrt(state.v[i]) + h.eps);
  }
}

std::string_view to_string(WarmupPolicy policy) {
  switch (policy) {
    case WarmupPolicy::none:
      return "none";
    case WarmupPolicy::r_warmup:
      return "r_warmup";
    case WarmupPolicy::lambda_warmup:
      return "lambda_warmup";
    case WarmupPolicy::zero_warmup:
      return "zero_warmup";
  }
  return "unknown";
}

WarmupPolicy parse_warmup_policy(std::string_view name) {
  if (name == "none") return WarmupPolicy::none;
  if (name == "r_warmup") return WarmupPolicy::r_warmup;
  if (name == "lambda_warmup") return WarmupPolicy::lambda_warmup;
  if (name == "zero_warmup") return WarmupPolicy::zero_warmup;
  throw ParameterError("unknown warmup policy '" + std::string(name) +
                       "' (expected none, r_warmup, lambda_warmup, zero_warmup)");
}

double lr_at(std::int64_t t, std::int64_t warmup_steps, double eta0) {
  if (warmup_steps < 1) throw ParameterError("lr_at: warmup_steps must be >= 1");
  if (t < 0) throw ParameterError("lr_at: t must be >= 0");
  return warmup_fraction(t, warmup_steps) * eta0;
}

void WarmupSchedule::validate() const {
  if (warmup_steps < 1) throw ParameterError("warmup_steps must be >= 1");
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw ParameterError("lr must be > 0");
  gr.validate();
}

GrParams gr_params_at(std::int64_t t, const WarmupSchedule& sched) {
  if (t < 0) throw ParameterError("gr_params_at: t must be >= 0");
  if (sched.warmup_steps < 1) throw ParameterError("gr_params_at: warmup_steps must be >= 1");
  const double lambda0 = sched.gr.lambda0;
  const double r0 = sched.gr.r0;
  const double frac = warmup_fraction(t, sched.warmup_steps);
  switch (sched.policy) {
    case WarmupPolicy::none:
      return {lambda0, r0};
    case WarmupPolicy::r_warmup: {
      if (frac == 1.0) return {lambda0, r0};
      const double r_t = frac * r0;
      return {(lambda0 / r0) * r_t, r_t};
    }
    case WarmupPolicy::lambda_warmup:
      return {frac * lambda0, r0};
    case WarmupPolicy::zero_warmup:
      return {t <= sched.warmup_steps ? 0.0 : lambda0, r0};
  }
  return {lambda0, r0};
}

RealVector grad_clip(const RealVector& g, double max_norm) {
  if (!(max_norm > 0.0)) throw ParameterError("grad_clip: max_norm must be > 0");
  const double norm = l2_norm(g);
  if (norm <= max_norm) return g;
  return g * (max_norm / norm);
}

void TrainConfig::validate() const {
  std::visit([](const auto& h) { h.validate(); }, optimizer);
  schedule.validate();
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (clip_norm && !(*clip_norm > 0.0)) throw ParameterError("clip_norm must be > 0");
  if (eval_every < 0) throw ParameterError("eval_every must be >= 0");
}

TrainResult train(const TrainConfig& cfg, const Objective& obj, const Dataset& data,
                  RealVector theta0) {
  cfg.validate();
  if (data.size() == 0) throw ParameterError("train: dataset is empty");
  if (theta0.size() != obj.dimension()) {
    throw DimensionError("train: initial parameters do not match the objective dimension");
  }

  TrainResult result;
  result.theta = std::move(theta0);
  RealVector& theta = result.theta;
  const std::size_t dim = theta.size();

  std::variant<AdamState, RmsPropState> state =
      std::holds_alternative<AdamHyper>(cfg.optimizer)
          ? std::variant<AdamState, RmsPropState>(
                AdamState(dim, std::get<AdamHyper>(cfg.optimizer)))
          : std::variant<AdamState, RmsPropState>(
                RmsPropState(dim, std::get<RmsPropHyper>(cfg.optimizer)));

  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  result.records.reserve(static_cast<std::size_t>(cfg.epochs) * steps_per_epoch);
  std::vector<std::size_t> order(n);
  std::int64_t step = 0;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
    shuffle(order, shuffle_rng);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      ++step;
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const Batch batch =
          data.subset(std::span<const std::size_t>(order.data() + start, stop - start));

      TrainRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.lr = lr_at(step, cfg.schedule.warmup_steps, cfg.schedule.eta0);
      const GrParams gp = gr_params_at(step, cfg.schedule);
      rec.lambda_t = gp.lambda;
      rec.r_t = gp.r;

      GrEvaluation ev;
      try {
        ev = gr_evaluate(obj, theta, batch, gp.lambda, gp.r);
      } catch (const NumericError& e) {
        rec.loss = std::numeric_limits<double>::quiet_NaN();
        rec.grad_norm = std::numeric_limits<double>::quiet_NaN();
        rec.mixed_grad_norm = std::numeric_limits<double>::quiet_NaN();
        result.records.push_back(rec);
        result.diverged = true;
        result.diagnostic = "step " + std::to_string(step) + ": " + e.what();
        return result;
      }
      rec.loss = ev.loss;
      rec.grad_norm = l2_norm(ev.base_grad);
      rec.mixed_grad_norm = l2_norm(ev.mixed_grad);
      if (!std::isfinite(rec.loss) || !std::isfinite(rec.grad_norm) ||
          !std::isfinite(rec.mixed_grad_norm)) {
        result.records.push_back(rec);
        result.diverged = true;
        result.diagnostic = "step " + std::to_string(step) + ": non-finite loss or gradient";
        return result;
      }

      const RealVector update =
          cfg.clip_norm ? grad_clip(ev.mixed_grad, *cfg.clip_norm) : ev.mixed_grad;
      std::visit(
          [&](auto& s) {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, AdamState>) {
              adam_step(s, theta, update, rec.lr);
            } else {
              rmsprop_step(s, theta, update, rec.lr);
            }
          },
          state);
      if (!theta.all_finite()) {
        result.records.push_back(rec);
        result.diverged = true;
        result.diagnostic = "step " + std::to_string(step) + ": parameters became non-finite";
        return result;
      }

      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        rec.eval_error = obj.error_rate(theta, data);
      }
      result.records.push_back(rec);
    }
  }
  return result;
}

}  // namespace grwarm
