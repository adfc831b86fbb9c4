#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "grwarm/numerics.hpp"
#include "grwarm/objectives.hpp"
#include "grwarm/regularizer.hpp"

namespace grwarm {

// ---------------------------------------------------------------------------
// Adaptive moments written out as direct sums over a gradient history.

/// Bias-corrected exponential mean of g_1..g_t:
/// (1 - b1) sum_i b1^(t-i) g_i / (1 - b1^t).
double momentum_phi(std::span<const double> history, double beta1);

/// Adaptive learning rate sqrt((1 - b2^t) / ((1 - b2) sum_i b2^(t-i) g_i^2)).
/// Throws NumericError when every g_i is zero.
double adaptive_lr_psi(std::span<const double> history, double beta2);

// ---------------------------------------------------------------------------
// Optimizers

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  void validate() const;
};

struct AdamState {
  RealVector m;
  RealVector v;
  std::int64_t t = 0;
  AdamHyper hyper;

  AdamState(std::size_t dim, AdamHyper h);

  /// Bias-corrected first moment of coordinate i; equals momentum_phi of its history.
  double phi(std::size_t i) const;
  /// Inverse root of the bias-corrected second moment; equals adaptive_lr_psi.
  double psi(std::size_t i) const;
};

/// theta -= lr * m_hat / (sqrt(v_hat) + eps), updating the moments in place.
void adam_step(AdamState& state, RealVector& theta, const RealVector& g, double lr);

struct RmsPropHyper {
  double decay = 0.9;
  double eps = 1e-8;
  void validate() const;
};

struct RmsPropState {
  RealVector v;
  RmsPropHyper hyper;

  RmsPropState(std::size_t dim, RmsPropHyper h);
};

/// v = d v + (1 - d) g^2; theta -= lr * g / (sqrt(v) + eps).
void rmsprop_step(RmsPropState& state, RealVector& theta, const RealVector& g, double lr);

using OptimizerHyper = std::variant<AdamHyper, RmsPropHyper>;

// ---------------------------------------------------------------------------
// Schedules

enum class WarmupPolicy { none, r_warmup, lambda_warmup, zero_warmup };

std::string_view to_string(WarmupPolicy policy);
WarmupPolicy parse_warmup_policy(std::string_view name);

/// min(t / warmup_steps, 1) * eta0.
double lr_at(std::int64_t t, std::int64_t warmup_steps, double eta0);

struct WarmupSchedule {
  WarmupPolicy policy = WarmupPolicy::none;
  std::int64_t warmup_steps = 1;
  double eta0 = 1e-3;
  GrConfig gr;

  void validate() const;
};

struct GrParams {
  double lambda;
  double r;
};

/// Regularization parameters at step t.
///
///   none           (lambda0, r0)
///   r_warmup       r_t = min(t/Tw, 1) r0, lambda_t = (lambda0/r0) r_t
///   lambda_warmup  lambda_t = min(t/Tw, 1) lambda0, r_t = r0
///   zero_warmup    lambda_t = 0 for t <= Tw else lambda0, r_t = r0
GrParams gr_params_at(std::int64_t t, const WarmupSchedule& sched);

/// g scaled down to norm max_norm when it is longer.
RealVector grad_clip(const RealVector& g, double max_norm);

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  OptimizerHyper optimizer = AdamHyper{};
  WarmupSchedule schedule;
  std::int64_t epochs = 1;
  std::size_t batch_size = 32;
  std::optional<double> clip_norm = 1.0;  // nullopt disables clipping
  std::uint64_t seed = 0;
  std::int64_t eval_every = 0;  // 0 disables periodic evaluation

  void validate() const;
};

struct TrainRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;        // ||g1||, before mixing and clipping
  double mixed_grad_norm = 0.0;  // ||g_t||, after mixing, before clipping
  double lr = 0.0;
  double lambda_t = 0.0;
  double r_t = 0.0;
  std::optional<double> eval_error;

  friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  RealVector theta;
  bool diverged = false;
  std::string diagnostic;
};

/// Runs epochs x ceil(n / batch_size) steps, numbered from 1.
///
/// Each epoch draws a fresh seeded permutation of the data. Per step:
/// eta_t = lr_at(t), (lambda_t, r_t) = gr_params_at(t), g_t from gr_evaluate
/// (single evaluation when lambda_t = 0), optional clipping, optimizer update.
/// A non-finite loss or gradient stops the run; the last record then carries
/// the offending values and `diverged` is set.
TrainResult train(const TrainConfig& cfg, const Objective& obj, const Dataset& data,
                  RealVector theta0);

}  // namespace grwarm
