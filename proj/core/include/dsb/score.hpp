#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dsb/mixture.hpp"
#include "dsb/schedule.hpp"

namespace dsb {

enum class PerturbationKind { kNone, kAdditiveBias, kMultiplicative, kSmoothField };

/// Controlled deviation of the model score from the exact one:
///   bias:  s + delta u
///   mult:  (1 + delta) s
///   field: s + delta sin(omega <x, u>) u
/// where u is a unit direction drawn from `seed`.
struct Perturbation {
  PerturbationKind kind = PerturbationKind::kNone;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
  double frequency = 1.0;

  static Perturbation none() { return {}; }
  static Perturbation bias(double delta, std::uint64_t seed) { return {PerturbationKind::kAdditiveBias, delta, seed}; }
  static Perturbation multiplicative(double delta) { return {PerturbationKind::kMultiplicative, delta}; }
  static Perturbation field(double omega, double delta, std::uint64_t seed) {
    return {PerturbationKind::kSmoothField, delta, seed, omega};
  }

  std::string describe() const;
};

std::string_view to_string(PerturbationKind kind) noexcept;
/// Accepts none|bias|mult|field; throws INVALID_ARGUMENT otherwise.
PerturbationKind parse_perturbation_kind(std::string_view name);

/// Unit vector in R^dim drawn deterministically from a seed.
Vector unit_direction(std::uint64_t seed, std::size_t dim);

/// Squared score deviations grouped by discretization step. One meter per
/// worker chunk; merge() in a fixed order gives a reproducible total.
class ScoreMeter {
 public:
  void record(std::size_t step, double squared_deviation);
  void merge(const ScoreMeter& other);
  bool empty() const noexcept;

  /// sup_k sqrt(mean squared deviation at step k). Throws NO_SAMPLES if empty.
  double epsilon() const;
  /// Per-step RMS deviation (NaN for steps without samples).
  std::vector<double> per_step_rms() const;

 private:
  std::vector<double> sums_;
  std::vector<std::uint64_t> counts_;
};

/// Exact mixture score, optionally perturbed to stand in for a trained network.
class ScoreModel {
 public:
  ScoreModel(std::shared_ptr<const GaussianMixture> mixture, Schedule schedule,
             Perturbation perturbation = Perturbation::none(), bool metering = true);

  std::size_t dim() const noexcept { return mixture_->dim(); }
  const GaussianMixture& mixture() const noexcept { return *mixture_; }
  std::shared_ptr<const GaussianMixture> mixture_ptr() const noexcept { return mixture_; }
  const Schedule& schedule() const noexcept { return schedule_; }
  const Perturbation& perturbation() const noexcept { return perturbation_; }
  bool metering() const noexcept { return metering_; }
  std::string describe() const;

  MarginalMixture prepare(double t) const { return MarginalMixture(*mixture_, schedule_, t); }

  /// out = s_theta(slice.time(), x). Records ||s - s_theta||^2 under `step`
  /// into `meter` when metering is on and a meter is given.
  void evaluate(const MarginalMixture& slice, std::span<const double> x, std::span<double> out,
                ScoreWorkspace& ws, ScoreMeter* meter, std::size_t step) const;

  /// Convenience form that builds the slice and records into meter().
  /// Throws DIMENSION_MISMATCH.
  Vector evaluate(double t, std::span<const double> x, std::size_t step = 0);

  ScoreMeter& meter() noexcept { return meter_; }
  const ScoreMeter& meter() const noexcept { return meter_; }
  double metered_epsilon() const { return meter_.epsilon(); }

 private:
  std::shared_ptr<const GaussianMixture> mixture_;
  Schedule schedule_;
  Perturbation perturbation_;
  bool metering_;
  Vector direction_;
  ScoreMeter meter_;
};

struct FisherEstimate {
  double value;
  double standard_error;
};

/// Monte-Carlo estimate of E||s(t, x_t)||^2 with x_t drawn from the forward marginal.
FisherEstimate fisher_information_estimate(const GaussianMixture& mixture, const Schedule& schedule, double t,
                                           std::size_t n, std::uint64_t seed, std::size_t workers = 1);

/// Upper bound I0 d / min_t (phi_f(t)^2 d + phi_fg(t) I0) on the Fisher
/// information of the forward marginal over [0, t_max], with I0 the data
/// Fisher information; the minimum is taken over `grid_points` equispaced times.
double fisher_information_bound(const Schedule& schedule, double data_fisher, std::size_t dim, double t_max,
                                std::size_t grid_points = 4001);

}  // namespace dsb
