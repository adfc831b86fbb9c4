#include "grwarm/regularizer.hpp"

#include <cmath>

#include "grwarm/errors.hpp"

namespace grwarm {

void GrConfig::validate() const {
  if (!std::isfinite(lambda0) || lambda0 < 0.0) {
    throw ParameterError("GR: lambda0 must be finite and >= 0");
  }
  if (!std::isfinite(r0) || !(r0 > 0.0)) throw ParameterError("GR: r0 must be finite and > 0");
}

RealVector perturbation(const RealVector& g, double r) {
  if (!(r >= 0.0)) throw ParameterError("perturbation: r must be >= 0");
  const double norm = l2_norm(g);
  if (norm == 0.0 || r == 0.0) return RealVector(g.size());
  return g * (r / norm);
}

GrEvaluation gr_evaluate(const Objective& obj, const RealVector& theta, const Batch& batch,
                         double lambda, double r) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("gr_gradient: lambda must be finite and >= 0");
  }
  if (lambda > 0.0 && !(r > 0.0)) {
    throw ParameterError("gr_gradient: r must be > 0 when lambda > 0");
  }

  GrEvaluation out;
  auto [loss, g1] = obj.loss_grad(theta, batch);
  out.loss = loss;
  out.gradient_evaluations = 1;
  if (lambda == 0.0 || l2_norm(g1) == 0.0) {
    out.base_grad = g1;
    out.mixed_grad = std::move(g1);
    return out;
  }

  const RealVector shifted = theta + perturbation(g1, r);
  RealVector g2 = obj.loss_grad(shifted, batch).grad;
  out.gradient_evaluations = 2;

  const double ratio = lambda / r;
  RealVector mixed(g1.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    mixed[i] = (1.0 - ratio) * g1[i] + ratio * g2[i];
  }
  out.base_grad = std::move(g1);
  out.mixed_grad = std::move(mixed);
  return out;
}

double penalized_loss(const Objective& obj, const RealVector& theta, const Batch& batch,
                      double lambda) {
  const auto [loss, grad] = obj.loss_grad(theta, batch);
  return loss + lambda * l2_norm(grad);
}

}  // namespace grwarm
