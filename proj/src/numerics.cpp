#include "grwarm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "grwarm/errors.hpp"
#include "grwarm/objectives.hpp"

namespace grwarm {

namespace {

void require_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("RealVector: non-finite entry at index " + std::to_string(i));
    }
  }
}

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionError("RealVector: size mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RealVector::RealVector(std::size_t n, double fill) : values_(n, fill) {
  require_finite(values_);
}

RealVector::RealVector(std::vector<double> values) : values_(std::move(values)) {
  require_finite(values_);
}

RealVector::RealVector(std::initializer_list<double> values) : values_(values) {
  require_finite(values_);
}

bool RealVector::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

RealVector& RealVector::operator+=(const RealVector& other) {
  require_same_size(size(), other.size());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

RealVector& RealVector::operator-=(const RealVector& other) {
  require_same_size(size(), other.size());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

RealVector& RealVector::operator*=(double c) {
  for (double& v : values_) v *= c;
  return *this;
}

double l2_norm(std::span<const double> v) {
  // Scaled accumulation so large or tiny entries neither overflow nor underflow.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (double x : v) {
    const double y = x / scale;
    sum += y * y;
  }
  return scale * std::sqrt(sum);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

std::uint64_t Rng::next_u64() {
  ++position_;
  return engine_();
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ParameterError("Rng::uniform_index: n must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double gaussian_sample(Rng& rng, double mean, double variance) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    throw ParameterError("gaussian_sample: variance must be finite and >= 0");
  }
  return mean + std::sqrt(variance) * rng.normal();
}

void shuffle(std::span<std::size_t> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(items[i - 1], items[j]);
  }
}

RealVector finite_diff_grad(const ScalarFunction& f, const RealVector& theta, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ParameterError("finite_diff_grad: step h must be positive");
  }
  RealVector grad(theta.size());
  RealVector probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double up = f(probe);
    probe[i] = theta[i] - h;
    const double down = f(probe);
    probe[i] = theta[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite loss while probing coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

RealVector finite_diff_grad(const Objective& obj, const RealVector& theta, const Batch& batch,
                            double h) {
  return finite_diff_grad([&](const RealVector& p) { return obj.loss(p, batch); }, theta, h);
}

}  // namespace grwarm
