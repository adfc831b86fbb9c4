#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grwarm/objectives.hpp"
#include "grwarm/optim.hpp"

namespace grwarm {

/// Schema violation in a run configuration; the message names the field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ModelKind { quadratic, mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  // quadratic
  std::size_t dim = 10;
  double eig_min = 0.1;
  double eig_max = 10.0;
  double init_scale = 1.0;
  // mlp
  std::vector<std::size_t> hidden = {16};
  Activation activation = Activation::tanh;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::blobs;
  std::size_t n = 0;
  std::size_t classes = 2;
  std::uint64_t seed = 0;
};

struct RunConfig {
  ModelSpec model;
  DatasetSpec dataset;
  TrainConfig train;
};

/// Parses and validates a run configuration document:
///
///   {model, dataset: {kind, n, classes, seed},
///    optimizer: {kind, beta1, beta2, decay, eps}, lr, warmup_steps, policy,
///    lambda0, r0, epochs, batch_size, clip_norm, seed, eval_every}
///
/// `model` is "quadratic", "mlp" or an object with `kind` plus
/// {dim, eig_min, eig_max, init_scale} or {hidden, activation}. `dataset`,
/// its `seed`, and the top-level `seed` are required; unknown keys are
/// rejected. `clip_norm` may be null or false to disable clipping.
RunConfig parse_run_config(const nlohmann::json& doc);

/// Fully resolved configuration, defaults filled in.
nlohmann::json to_json(const RunConfig& cfg);

/// Objective, data and starting point built deterministically from a config.
struct Experiment {
  Dataset data;
  std::unique_ptr<Objective> objective;
  RealVector theta0;
};

Experiment make_experiment(const RunConfig& cfg);

/// 17-significant-digit rendering; non-finite values become `null`.
std::string format_number(double v);

/// One JSON object per line with keys step, epoch, loss, grad_norm,
/// mixed_grad_norm, lr, lambda_t, r_t and, on evaluation steps, eval_error.
std::string format_record(const TrainRecord& rec);
TrainRecord parse_record(std::string_view line);

void write_trace(std::ostream& out, const std::vector<TrainRecord>& records);
std::vector<TrainRecord> read_trace(std::istream& in);

}  // namespace grwarm
