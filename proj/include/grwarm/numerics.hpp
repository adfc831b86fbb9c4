#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace grwarm {

class Objective;
struct Dataset;
using Batch = Dataset;

/// Fixed-length vector of finite reals. Constructors reject NaN/Inf; mutable
/// access through `data()` is unchecked, call `all_finite()` where it matters.
class RealVector {
 public:
  RealVector() = default;
  explicit RealVector(std::size_t n, double fill = 0.0);
  explicit RealVector(std::vector<double> values);
  RealVector(std::initializer_list<double> values);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> data() const { return values_; }
  std::span<double> data() { return values_; }
  const std::vector<double>& values() const { return values_; }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool all_finite() const;

  RealVector& operator+=(const RealVector& other);
  RealVector& operator-=(const RealVector& other);
  RealVector& operator*=(double c);

  friend RealVector operator+(RealVector a, const RealVector& b) { return a += b; }
  friend RealVector operator-(RealVector a, const RealVector& b) { return a -= b; }
  friend RealVector operator*(RealVector a, double c) { return a *= c; }
  friend RealVector operator*(double c, RealVector a) { return a *= c; }
  friend bool operator==(const RealVector&, const RealVector&) = default;

 private:
  std::vector<double> values_;
};

double l2_norm(std::span<const double> v);
inline double l2_norm(const RealVector& v) { return l2_norm(v.data()); }

double dot(std::span<const double> a, std::span<const double> b);

/// Deterministic random source.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard, seeded through std::seed_seq (also standardized) from the
/// (seed, stream) pair. Normal variates use the basic (trigonometric) Box-Muller
/// transform with one cached spare, so a given seed and call sequence yields
/// the same stream on every conforming platform (up to libm rounding of
/// log/sin/cos). Independent child streams are obtained by varying `stream`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const { return position_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Draw from N(mean, variance). Variance, not standard deviation.
double gaussian_sample(Rng& rng, double mean, double variance);

/// In-place Fisher-Yates shuffle driven by `rng`.
void shuffle(std::span<std::size_t> items, Rng& rng);

using ScalarFunction = std::function<double(const RealVector&)>;

/// Central-difference gradient of `f` at `theta` with step `h`.
RealVector finite_diff_grad(const ScalarFunction& f, const RealVector& theta, double h);

/// Central-difference gradient of an objective's batch loss.
RealVector finite_diff_grad(const Objective& obj, const RealVector& theta, const Batch& batch,
                            double h);

}  // namespace grwarm
