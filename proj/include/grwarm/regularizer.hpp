#pragma once

#include "grwarm/numerics.hpp"
#include "grwarm/objectives.hpp"

namespace grwarm {

/// Gradient-norm regularization strength and finite-difference radius.
struct GrConfig {
  double lambda0 = 0.0;
  double r0 = 0.05;

  /// Throws ParameterError unless lambda0 >= 0, r0 > 0 and both finite.
  void validate() const;
  /// lambda/r > 1 extrapolates past the perturbed-point gradient.
  bool extrapolates() const { return lambda0 > r0; }
};

/// r * g / ||g||, or the zero vector when g = 0.
RealVector perturbation(const RealVector& g, double r);

/// Everything one GR gradient evaluation produces.
struct GrEvaluation {
  double loss = 0.0;           // L(theta) on the batch
  RealVector base_grad;        // g1 = grad L(theta)
  RealVector mixed_grad;       // (1 - lambda/r) g1 + (lambda/r) g2
  int gradient_evaluations = 0;
};

/// Hessian-free gradient of L(theta) + lambda ||grad L(theta)||.
///
/// g2 is taken at theta + perturbation(g1, r) on the same batch. When
/// lambda == 0 or g1 == 0 the result is g1 from a single evaluation.
GrEvaluation gr_evaluate(const Objective& obj, const RealVector& theta, const Batch& batch,
                         double lambda, double r);

inline RealVector gr_gradient(const Objective& obj, const RealVector& theta, const Batch& batch,
                              double lambda, double r) {
  return gr_evaluate(obj, theta, batch, lambda, r).mixed_grad;
}

/// The SAM gradient, i.e. GR with lambda = r.
inline RealVector sam_gradient(const Objective& obj, const RealVector& theta, const Batch& batch,
                               double r) {
  return gr_gradient(obj, theta, batch, r, r);
}

/// L(theta) + lambda ||grad L(theta)||, the loss GR approximates the gradient of.
double penalized_loss(const Objective& obj, const RealVector& theta, const Batch& batch,
                      double lambda);

}  // namespace grwarm
