#include "grwarm/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "grwarm/errors.hpp"

namespace grwarm {

// ---------------------------------------------------------------------------
// Datasets

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::blobs:
      return "blobs";
    case DatasetKind::spirals:
      return "spirals";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "blobs") return DatasetKind::blobs;
  if (name == "spirals") return DatasetKind::spirals;
  throw ParameterError("unknown dataset kind '" + std::string(name) + "'");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_features = num_features;
  out.num_classes = num_classes;
  out.inputs.reserve(indices.size() * num_features);
  out.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    auto r = row(idx);
    out.inputs.insert(out.inputs.end(), r.begin(), r.end());
    out.labels.push_back(labels[idx]);
  }
  return out;
}

void Dataset::validate() const {
  if (inputs.size() != labels.size() * num_features) {
    throw ParameterError("dataset: inputs size does not match samples x features");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw ParameterError("dataset: label " + std::to_string(label) + " outside [0, " +
                           std::to_string(num_classes) + ")");
    }
  }
  for (double v : inputs) {
    if (!std::isfinite(v)) throw ParameterError("dataset: non-finite input value");
  }
}

Dataset synth_dataset(DatasetKind kind, std::size_t n, std::size_t classes, std::uint64_t seed) {
  if (classes < 2 || n < classes) {
    throw ParameterError("synth_dataset: require n >= classes >= 2");
  }
  Dataset data;
  data.num_features = 2;
  data.num_classes = classes;
  data.inputs.reserve(2 * n);
  data.labels.reserve(n);
  Rng rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    const double base_angle = two_pi * static_cast<double>(c) / static_cast<double>(classes);
    double x = 0.0;
    double y = 0.0;
    if (kind == DatasetKind::blobs) {
      const double radius = std::max(5.0, 1.5 * static_cast<double>(classes));
      x = radius * std::cos(base_angle) + rng.normal();
      y = radius * std::sin(base_angle) + rng.normal();
    } else {
      // Position along the arm from the centre outwards, 1.5 turns per arm.
      const std::size_t per_arm = (n - c + classes - 1) / classes;
      const double s = (static_cast<double>(i / classes) + 0.5) / static_cast<double>(per_arm);
      const double angle = base_angle + 3.0 * std::numbers::pi * s;
      x = s * std::cos(angle) + 0.05 * rng.normal();
      y = s * std::sin(angle) + 0.05 * rng.normal();
    }
    data.inputs.push_back(x);
    data.inputs.push_back(y);
    data.labels.push_back(static_cast<int>(c));
  }
  return data;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.num_features; ++j) out << 'x' << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << data.labels[i] << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("dataset csv: missing header");
  Dataset data;
  {
    std::stringstream header(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(header, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2 || cells.back() != "label") {
      throw ParameterError("dataset csv: header must end with 'label'");
    }
    data.num_features = cells.size() - 1;
  }
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(row, cell, ',')) {
      try {
        if (col < data.num_features) {
          data.inputs.push_back(std::stod(cell));
        } else if (col == data.num_features) {
          const int label = std::stoi(cell);
          data.labels.push_back(label);
          max_label = std::max(max_label, label);
        }
      } catch (const std::exception&) {
        throw ParameterError("dataset csv: bad number on line " + std::to_string(line_no));
      }
      ++col;
    }
    if (col != data.num_features + 1) {
      throw ParameterError("dataset csv: wrong column count on line " + std::to_string(line_no));
    }
  }
  data.num_classes = static_cast<std::size_t>(max_label + 1);
  data.validate();
  return data;
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticObjective::QuadraticObjective(Eigen::MatrixXd a) : a_(std::move(a)) {
  if (a_.rows() == 0 || a_.rows() != a_.cols()) {
    throw ParameterError("QuadraticObjective: matrix must be square and nonempty");
  }
  if (!a_.allFinite()) throw ParameterError("QuadraticObjective: non-finite matrix entry");
  const double scale = std::max(a_.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw ParameterError("QuadraticObjective: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a_, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -tol * a_.rows()) {
    throw ParameterError("QuadraticObjective: matrix is not positive semidefinite");
  }
}

QuadraticObjective QuadraticObjective::random(std::size_t dim, double eig_min, double eig_max,
                                              std::uint64_t seed) {
  if (dim == 0) throw ParameterError("QuadraticObjective::random: dim must be positive");
  if (!(eig_min > 0.0) || !(eig_max >= eig_min) || !std::isfinite(eig_max)) {
    throw ParameterError("QuadraticObjective::random: need 0 < eig_min <= eig_max");
  }
  const auto n = static_cast<Eigen::Index>(dim);
  Rng rng(seed);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd eigs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double frac = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    eigs(i) = eig_min * std::pow(eig_max / eig_min, frac);
  }
  Eigen::MatrixXd a = q * eigs.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose()).eval();
  return QuadraticObjective(std::move(a));
}

void QuadraticObjective::check_dim(const RealVector& theta) const {
  if (theta.size() != dimension()) {
    throw DimensionError("QuadraticObjective: theta has " + std::to_string(theta.size()) +
                         " entries, expected " + std::to_string(dimension()));
  }
}

LossGrad QuadraticObjective::eval_grad(const RealVector& theta) const {
  check_dim(theta);
  const Eigen::Map<const Eigen::VectorXd> t(theta.data().data(), a_.rows());
  const Eigen::VectorXd g = a_ * t;
  return {0.5 * t.dot(g), RealVector(std::vector<double>(g.data(), g.data() + g.size()))};
}

RealVector QuadraticObjective::gr_exact_grad(const RealVector& theta, double lambda) const {
  check_dim(theta);
  const Eigen::Map<const Eigen::VectorXd> t(theta.data().data(), a_.rows());
  const Eigen::VectorXd g = a_ * t;
  const double norm = l2_norm(std::span<const double>(g.data(), g.size()));
  if (norm == 0.0) {
    throw SingularityError("gr_exact_grad: A theta = 0, penalty gradient undefined");
  }
  const Eigen::VectorXd out = g + (lambda / norm) * (a_ * g);
  return RealVector(std::vector<double>(out.data(), out.data() + out.size()));
}

double QuadraticObjective::loss(const RealVector& theta, const Batch&) const {
  return eval_grad(theta).loss;
}

LossGrad QuadraticObjective::loss_grad(const RealVector& theta, const Batch&) const {
  return eval_grad(theta);
}

// ---------------------------------------------------------------------------
// MLP

std::string_view to_string(Activation act) {
  return act == Activation::tanh ? "tanh" : "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ParameterError("unknown activation '" + std::string(name) + "'");
}

struct MlpClassifier::Forward {
  // pre[l]: pre-activation of layer l; post[l]: its input (post[0] = x).
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  std::vector<double> proba;
  double log_sum_exp = 0.0;
};

MlpClassifier::MlpClassifier(std::vector<std::size_t> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation) {
  if (widths_.size() < 2) throw ParameterError("MlpClassifier: need at least input and output");
  for (std::size_t w : widths_) {
    if (w == 0) throw ParameterError("MlpClassifier: layer widths must be positive");
  }
  if (widths_.back() < 2) throw ParameterError("MlpClassifier: need at least two classes");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(num_params_);
    num_params_ += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
}

RealVector MlpClassifier::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  RealVector theta(num_params_);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    const std::size_t count = widths_[l + 1] * widths_[l] + widths_[l + 1];
    for (std::size_t k = 0; k < count; ++k) {
      theta[offsets_[l] + k] = bound * (2.0 * rng.uniform() - 1.0);
    }
  }
  return theta;
}

void MlpClassifier::check_inputs(const RealVector& theta, const Batch& batch) const {
  if (theta.size() != num_params_) {
    throw DimensionError("MlpClassifier: theta has " + std::to_string(theta.size()) +
                         " entries, expected " + std::to_string(num_params_));
  }
  if (batch.size() == 0) throw ParameterError("MlpClassifier: empty batch");
  if (batch.num_features != widths_.front()) {
    throw DimensionError("MlpClassifier: batch feature count does not match input width");
  }
}

void MlpClassifier::forward(const RealVector& theta, std::span<const double> x,
                            Forward& fw) const {
  const std::size_t layers = widths_.size() - 1;
  fw.pre.resize(layers);
  fw.post.resize(layers);
  fw.post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double* w = theta.data().data() + offsets_[l];
    const double* b = w + out * in;
    auto& z = fw.pre[l];
    z.assign(out, 0.0);
    const auto& a = fw.post[l];
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * a[i];
      z[o] = s;
    }
    if (l + 1 < layers) {
      auto& next = fw.post[l + 1];
      next.resize(out);
      for (std::size_t o = 0; o < out; ++o) {
        next[o] = activation_ == Activation::tanh ? std::tanh(z[o]) : std::max(0.0, z[o]);
      }
    }
  }
  const auto& logits = fw.pre.back();
  const double zmax = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(zmax)) throw NumericError("MlpClassifier: non-finite activations");
  fw.proba.resize(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    fw.proba[k] = std::exp(logits[k] - zmax);
    sum += fw.proba[k];
  }
  for (double& p : fw.proba) p /= sum;
  fw.log_sum_exp = zmax + std::log(sum);
}

std::vector<double> MlpClassifier::predict_proba(const RealVector& theta,
                                                 std::span<const double> x) const {
  if (theta.size() != num_params_ || x.size() != widths_.front()) {
    throw DimensionError("MlpClassifier::predict_proba: shape mismatch");
  }
  Forward fw;
  forward(theta, x, fw);
  return fw.proba;
}

double MlpClassifier::loss(const RealVector& theta, const Batch& batch) const {
  check_inputs(theta, batch);
  Forward fw;
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    forward(theta, batch.row(s), fw);
    total += fw.log_sum_exp - fw.pre.back()[static_cast<std::size_t>(batch.labels[s])];
  }
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean)) throw NumericError("MlpClassifier: non-finite loss");
  return mean;
}

LossGrad MlpClassifier::loss_grad(const RealVector& theta, const Batch& batch) const {
  check_inputs(theta, batch);
  const std::size_t layers = widths_.size() - 1;
  RealVector grad(num_params_);
  auto g = grad.data();
  Forward fw;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  double total = 0.0;

  for (std::size_t s = 0; s < batch.size(); ++s) {
    forward(theta, batch.row(s), fw);
    const auto label = static_cast<std::size_t>(batch.labels[s]);
    total += fw.log_sum_exp - fw.pre.back()[label];

    delta = fw.proba;
    delta[label] -= 1.0;
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = widths_[l];
      const std::size_t out = widths_[l + 1];
      const double* w = theta.data().data() + offsets_[l];
      double* gw = g.data() + offsets_[l];
      double* gb = gw + out * in;
      const auto& a = fw.post[l];
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * a[i];
        gb[o] += delta[o];
      }
      if (l == 0) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] += w[o * in + i] * delta[o];
      }
      const auto& z = fw.pre[l - 1];
      for (std::size_t i = 0; i < in; ++i) {
        if (activation_ == Activation::tanh) {
          prev_delta[i] *= 1.0 - a[i] * a[i];
        } else if (z[i] <= 0.0) {
          prev_delta[i] = 0.0;
        }
      }
      delta.swap(prev_delta);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  grad *= inv_n;
  const double mean = total * inv_n;
  if (!std::isfinite(mean) || !grad.all_finite()) {
    throw NumericError("MlpClassifier: non-finite loss or gradient");
  }
  return {mean, std::move(grad)};
}

std::optional<double> MlpClassifier::error_rate(const RealVector& theta,
                                                const Dataset& data) const {
  check_inputs(theta, data);
  Forward fw;
  std::size_t wrong = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    forward(theta, data.row(s), fw);
    const auto best = static_cast<int>(
        std::max_element(fw.proba.begin(), fw.proba.end()) - fw.proba.begin());
    if (best != data.labels[s]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace grwarm
