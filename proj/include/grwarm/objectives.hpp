#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "grwarm/numerics.hpp"

namespace grwarm {

enum class DatasetKind { blobs, spirals };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

/// Labelled samples, inputs stored row-major (samples x features).
/// A batch is a Dataset holding a subset of rows.
struct Dataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {inputs.data() + i * num_features, num_features};
  }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Throws ParameterError when shapes disagree or a label is out of range.
  void validate() const;
};

/// Deterministic synthetic 2-D classification data. Labels are assigned
/// round-robin so class counts differ by at most one.
Dataset synth_dataset(DatasetKind kind, std::size_t n, std::size_t classes, std::uint64_t seed);

/// CSV with columns x0..x{d-1},label and a header row.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);

struct LossGrad {
  double loss;
  RealVector grad;
};

/// Differentiable loss over a parameter vector and a batch of data.
/// Implementations are immutable after construction.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dimension() const = 0;
  virtual double loss(const RealVector& theta, const Batch& batch) const = 0;
  virtual LossGrad loss_grad(const RealVector& theta, const Batch& batch) const = 0;
  /// Misclassification rate on `data`, for objectives that classify.
  virtual std::optional<double> error_rate(const RealVector& /*theta*/,
                                           const Dataset& /*data*/) const {
    return std::nullopt;
  }
};

/// L(theta) = 1/2 theta^T A theta with A symmetric positive semidefinite.
///
/// The Hessian is the constant A, so the two-evaluation GR gradient is exact
/// here for every radius, which makes this the reference testbed. The batch
/// argument of the Objective interface is ignored.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(Eigen::MatrixXd a);

  /// A = Q diag(eigs) Q^T with Q a seeded random rotation and eigenvalues
  /// log-spaced in [eig_min, eig_max].
  static QuadraticObjective random(std::size_t dim, double eig_min, double eig_max,
                                   std::uint64_t seed);

  const Eigen::MatrixXd& matrix() const { return a_; }

  LossGrad eval_grad(const RealVector& theta) const;
  /// Gradient of L(theta) + lambda * ||grad L(theta)||: A theta + lambda A^2 theta / ||A theta||.
  RealVector gr_exact_grad(const RealVector& theta, double lambda) const;

  std::size_t dimension() const override { return static_cast<std::size_t>(a_.rows()); }
  double loss(const RealVector& theta, const Batch& batch) const override;
  LossGrad loss_grad(const RealVector& theta, const Batch& batch) const override;

 private:
  void check_dim(const RealVector& theta) const;

  Eigen::MatrixXd a_;
};

enum class Activation { tanh, relu };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

/// Fully connected softmax classifier trained with mean cross-entropy.
///
/// Parameters are flattened layer by layer as W (out x in, row-major)
/// followed by b (out).
class MlpClassifier final : public Objective {
 public:
  /// `widths` = {inputs, hidden..., classes}; at least two entries.
  MlpClassifier(std::vector<std::size_t> widths, Activation activation = Activation::tanh);

  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  std::size_t num_classes() const { return widths_.back(); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  RealVector init_params(std::uint64_t seed) const;

  /// Class probabilities for one input row.
  std::vector<double> predict_proba(const RealVector& theta, std::span<const double> x) const;

  std::size_t dimension() const override { return num_params_; }
  double loss(const RealVector& theta, const Batch& batch) const override;
  LossGrad loss_grad(const RealVector& theta, const Batch& batch) const override;
  std::optional<double> error_rate(const RealVector& theta, const Dataset& data) const override;

 private:
  struct Forward;
  void check_inputs(const RealVector& theta, const Batch& batch) const;
  void forward(const RealVector& theta, std::span<const double> x, Forward& fw) const;

  std::vector<std::size_t> widths_;
  Activation activation_;
  std::vector<std::size_t> offsets_;  // start of each layer's W block
  std::size_t num_params_ = 0;
};

}  // namespace grwarm
