#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dsb {

enum class ScheduleKind { kVpLinear, kGeneric };

/// Conditional law of the forward process: x_t | x_0 ~ N(mean_decay * x_0, variance * I).
struct MarginalParams {
  double mean_decay;
  double variance;
};

/// Forward noising SDE dx = -f(t) x dt + g(t) dW with scalar coefficients.
///
/// The vp-linear schedule (f = t/2, g = sqrt(t)) uses closed forms
///   mean_decay(t) = exp(-t^2/4),  variance(t) = 1 - exp(-t^2/2).
/// Generic schedules integrate
///   mean_decay(t) = exp(-F(t)),  variance(t) = int_0^t exp(-2 (F(t) - F(s))) g(s)^2 ds,
/// with F(t) = int_0^t f, by composite Simpson with panels no wider than the
/// quadrature step. Instances are immutable and cheap to copy.
class Schedule {
 public:
  using Coefficient = std::function<double(double)>;

  static Schedule vp_linear();
  /// Throws NON_POSITIVE_STEP unless quadrature_step > 0.
  static Schedule generic(Coefficient f, Coefficient g, double quadrature_step,
                          std::string description = "generic");

  ScheduleKind kind() const noexcept { return kind_; }
  const std::string& description() const noexcept { return description_; }
  double quadrature_step() const noexcept { return quadrature_step_; }

  double drift_rate(double t) const;  // f(t)
  double diffusion(double t) const;   // g(t)
  double mean_decay(double t) const;
  double variance(double t) const;

  /// Throws NEGATIVE_TIME for t < 0.
  MarginalParams marginal_params(double t) const;

 private:
  Schedule() = default;
  MarginalParams integrate(double t) const;

  ScheduleKind kind_ = ScheduleKind::kVpLinear;
  std::shared_ptr<const Coefficient> f_;
  std::shared_ptr<const Coefficient> g_;
  double quadrature_step_ = 0.0;
  std::string description_;
};

inline Schedule make_vp_schedule() { return Schedule::vp_linear(); }
inline Schedule make_generic_schedule(Schedule::Coefficient f, Schedule::Coefficient g, double quadrature_step) {
  return Schedule::generic(std::move(f), std::move(g), quadrature_step);
}

/// Piecewise polynomial in absolute time: on [breaks[i], breaks[i+1]) the value
/// is sum_j coeffs[i][j] * t^j. The last piece extends to +infinity and the
/// first piece also covers t < breaks[0].
struct PiecewisePolynomial {
  std::vector<double> breaks;
  std::vector<std::vector<double>> coeffs;

  /// Throws BAD_CONFIG on inconsistent sizes or unsorted breaks.
  void validate() const;
  double operator()(double t) const;
};

}  // namespace dsb
