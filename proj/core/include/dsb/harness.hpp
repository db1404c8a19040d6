#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dsb/metrics.hpp"
#include "dsb/mixture.hpp"
#include "dsb/sampler.hpp"
#include "dsb/schedule.hpp"
#include "dsb/score.hpp"

namespace dsb {

enum class SweepAxis { kStepSize, kTerminalTime, kScoreError };

std::string_view to_string(SweepAxis axis) noexcept;
/// h|T|eps; throws INVALID_ARGUMENT otherwise.
SweepAxis parse_sweep_axis(std::string_view name);

/// Builtin data laws, all with diagonal covariances:
///   gaussian   single N(mu, diag(v)), mu_i = +-2 alternating, v_i from 0.05 to 0.2
///   gmm        four equally weighted components with +-2 sign patterns, v_i = 0.1
///   std-normal N(0, I)
/// Throws INVALID_ARGUMENT for unknown names or dim = 0.
GaussianMixture builtin_problem(std::string_view name, std::size_t dim);

struct ProblemSpec {
  std::string builtin = "gaussian";
  std::size_t dim = 16;
  std::string mixture_file;  // overrides builtin when set
};

struct ScheduleSpec {
  std::string kind = "vp-linear";  // or "generic"
  PiecewisePolynomial f;
  PiecewisePolynomial g;
  double quadrature_step = 1e-3;

  Schedule build() const;
};

struct SweepConfig {
  ProblemSpec problem;
  ScheduleSpec schedule;
  SamplerKind sampler = SamplerKind::kEulerMaruyama;
  InitKind init = InitKind::kStandardNormalSigmaT;
  MomentMode metric = MomentMode::kDiag;
  std::vector<double> values;  // swept h, T or perturbation magnitude
  double h = 0.04;             // fixed step for T and eps sweeps
  double terminal_time = 4.0;  // fixed T for h and eps sweeps
  Perturbation perturbation;   // eps sweeps override the magnitude per cell
  std::size_t n = 10000;
  std::uint64_t seed = 1;
  double window_min = 0.0;
  double window_max = std::numeric_limits<double>::infinity();
  std::size_t workers = 1;
  std::string reference_file;  // sample file used instead of analytic moments

  /// Throws BAD_CONFIG: values must be non-empty, finite, strictly monotone and
  /// positive (non-negative for eps sweeps); n >= 2.
  void validate(SweepAxis axis) const;
};

/// Data law, schedule and reference summary a sweep runs against.
struct Problem {
  std::shared_ptr<const GaussianMixture> mixture;
  Schedule schedule = Schedule::vp_linear();
  MomentSummary reference;
  bool analytic_reference = true;
};

Problem resolve_problem(const SweepConfig& cfg);

struct SweepRow {
  double value = 0.0;
  double w2 = 0.0;
  double eps = 0.0;
  bool finite = true;
  bool stable = true;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::optional<std::size_t> first_unstable_step;
};

struct ConvergenceReport {
  SweepAxis axis = SweepAxis::kStepSize;
  std::vector<SweepRow> rows;
  std::optional<SlopeFit> fit;
  std::string fit_status;            // "ok", "DEGENERATE_FIT" or "not-applicable"
  std::vector<std::size_t> fit_rows;  // indices of rows entering the fit
  double mc_floor = 0.0;
  std::optional<double> argmin;  // T sweeps: swept value with the smallest stable W2
  SweepConfig config;
  double wall_seconds = 0.0;
};

struct CellResult {
  double w2 = 0.0;
  double eps = 0.0;
  bool finite = true;
  std::optional<std::size_t> first_unstable_step;
};

/// Overrides for tests and external drivers: a replacement cell evaluator
/// and/or a fixed Monte-Carlo floor.
struct SweepHooks {
  std::function<CellResult(const SweepConfig&, std::size_t index, double value, std::uint64_t seed)> evaluate;
  std::optional<double> mc_floor;
};

/// Seed of sweep cell `index`.
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t index) { return derive_seed(base, index); }

ConvergenceReport run_sweep(const SweepConfig& cfg, SweepAxis axis, const SweepHooks& hooks = {});
inline ConvergenceReport run_h_sweep(const SweepConfig& cfg, const SweepHooks& hooks = {}) {
  return run_sweep(cfg, SweepAxis::kStepSize, hooks);
}
inline ConvergenceReport run_T_sweep(const SweepConfig& cfg, const SweepHooks& hooks = {}) {
  return run_sweep(cfg, SweepAxis::kTerminalTime, hooks);
}
inline ConvergenceReport run_eps_sweep(const SweepConfig& cfg, const SweepHooks& hooks = {}) {
  return run_sweep(cfg, SweepAxis::kScoreError, hooks);
}

/// Monte-Carlo floor of the W2 estimate at sample size n: half the distance
/// between the two halves of n reference draws.
double estimate_mc_floor(const SweepConfig& cfg, const Problem& problem);

/// Marks rows unstable when non-finite or when W2 exceeds 10x the largest
/// finite neighbour, and returns the indices admissible for the slope fit
/// (stable, inside the window, W2 at least twice the floor).
std::vector<std::size_t> classify_rows(std::vector<SweepRow>& rows, SweepAxis axis, double window_min,
                                       double window_max, double mc_floor);

struct ParamChoice {
  double constant_c;
  double epsilon_target;
  double terminal_time;
  double predicted_rate_exponent;
  bool zero_c_warning;
};

/// Balances the error terms for step h: C = m0 mg^2 / (1 + m0), eps = sqrt(h),
/// T = -log(sqrt(h)) / (C + 1), predicted W2 = O(h^{C / (2 (C + 1))}).
/// Throws INVALID_H unless 0 < h < 1 and INVALID_ARGUMENT for m0 <= 0 or mg < 0.
ParamChoice param_choice(double h, double m0, double mg);

}  // namespace dsb
