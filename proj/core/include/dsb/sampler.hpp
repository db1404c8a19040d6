#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsb/metrics.hpp"
#include "dsb/mixture.hpp"
#include "dsb/rng.hpp"
#include "dsb/schedule.hpp"
#include "dsb/score.hpp"

namespace dsb {

/// Equidistant grid 0 = t_0 < ... < t_K = T with h = T / K and reverse
/// nodes tau_k = T - t_k. K = 0 is allowed and means "no steps".
class TimeGrid {
 public:
  /// Throws INVALID_ARGUMENT unless T > 0.
  TimeGrid(double terminal_time, std::size_t steps);
  /// K = max(1, round(T / h)).
  static TimeGrid from_step(double terminal_time, double h);

  double terminal_time() const noexcept { return terminal_time_; }
  std::size_t steps() const noexcept { return steps_; }
  double h() const noexcept { return h_; }
  double t(std::size_t k) const noexcept {
    return k >= steps_ ? terminal_time_ : static_cast<double>(k) * h_;
  }
  double tau(std::size_t k) const noexcept { return terminal_time_ - t(k); }

 private:
  double terminal_time_;
  std::size_t steps_;
  double h_;
};

/// Increment of one step: dW ~ N(0, h) and beta = h^{-3/2} int (W_s - W_{t_k}) ds,
/// jointly Gaussian per coordinate with Var(beta) = 1/3, Cov(dW, beta) = sqrt(h)/2.
struct BrownianDraw {
  Vector dW;
  Vector beta;
};

/// (dW, beta) from a pair of independent standard normals.
inline std::pair<double, double> increments_from_normals(double zeta1, double zeta2, double sqrt_h) noexcept {
  static const double kInvTwoSqrt3 = 0.5 / std::sqrt(3.0);
  return {sqrt_h * zeta1, 0.5 * zeta1 + kInvTwoSqrt3 * zeta2};
}

/// Fills dW and beta for (sample, step) from the counter-based stream.
void draw_increments(const CounterRng& rng, std::uint64_t sample, std::size_t step, double h,
                     std::span<double> dW, std::span<double> beta);
BrownianDraw draw_increments(const CounterRng& rng, std::uint64_t sample, std::size_t step, std::size_t dim,
                             double h);

enum class SamplerKind { kEulerMaruyama, kSrk15 };
enum class InitKind { kStandardNormalSigmaT, kExactTerminal };

std::string_view to_string(SamplerKind kind) noexcept;
std::string_view to_string(InitKind kind) noexcept;
/// em|srk15 and sigma|exact; throw INVALID_ARGUMENT otherwise.
SamplerKind parse_sampler_kind(std::string_view name);
InitKind parse_init_kind(std::string_view name);

/// Drift callback a(t, x) -> out for the general schemes.
using DriftFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

/// One Euler-Maruyama step of dx = a(t, x) dt + b(t) dW from t_k.
Vector em_update(std::span<const double> y, double t_k, double h, double b_k, const BrownianDraw& draw,
                 const DriftFn& drift);
/// One step of the two-stage order-3/2 scheme for additive noise:
///   Q  = y + h/2 a(t_k, y)
///   Q* = Q + 3/2 b(t_k) sqrt(h) beta
///   P  = b(t_k) dW + (b(t_{k+1}) - b(t_k)) (dW - sqrt(h) beta)
///   y' = y + h/3 [a(t_k + h/2, Q) + 2 a(t_k + h/2, Q*)] + P
Vector srk_update(std::span<const double> y, double t_k, double h, double b_k, double b_next,
                  const BrownianDraw& draw, const DriftFn& drift);

/// Reverse-time EM step: y + (f(tau_k) y + g(tau_k)^2 s_theta(tau_k, y)) h + g(tau_k) dW.
/// Throws NON_FINITE_STATE if the result is not finite.
Vector em_step(std::span<const double> y, std::size_t k, const TimeGrid& grid, const Schedule& schedule,
               const ScoreModel& model, const BrownianDraw& draw);
/// Reverse-time order-3/2 step with a(t, x) = f(T-t) x + g(T-t)^2 s_theta(T-t, x)
/// and b(t) = g(T-t); `g_next` is g(tau_{k+1}).
Vector srk_step(std::span<const double> y, std::size_t k, const TimeGrid& grid, const Schedule& schedule,
                const ScoreModel& model, const BrownianDraw& draw, double g_next);

struct ReverseConfig {
  SamplerKind sampler = SamplerKind::kEulerMaruyama;
  TimeGrid grid{4.0, 100};
  InitKind init = InitKind::kStandardNormalSigmaT;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct SampleMeta {
  std::uint64_t seed = 0;
  std::string sampler;
  std::string schedule;
  std::string init;
  double h = 0.0;
  double terminal_time = 0.0;
  std::size_t steps = 0;
  std::string score;
  bool stable = true;
  std::optional<std::size_t> first_unstable_step;
};

/// n x d row-major samples plus provenance.
struct SampleBatch {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;
  SampleMeta meta;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * d, d}; }
};

/// Simulates n reverse trajectories and returns the final iterates. A
/// non-finite state stops that trajectory and tags the batch unstable with
/// the earliest failing step. Metered deviations are merged into model.meter().
SampleBatch sample_reverse(const ReverseConfig& cfg, ScoreModel& model);

struct ReverseMoments {
  std::optional<MomentSummary> moments;  // empty when unstable
  bool stable = true;
  std::optional<std::size_t> first_unstable_step;
  ScoreMeter meter;
};

/// Same trajectories as sample_reverse (bit for bit) but streams them into a
/// moment summary instead of storing them.
ReverseMoments sample_reverse_moments(const ReverseConfig& cfg, const ScoreModel& model, MomentMode mode);

/// Draws phi_f(t) x_0 + sqrt(phi_fg(t)) z with x_0 from the mixture.
SampleBatch forward_marginal_sample(const GaussianMixture& mixture, const Schedule& schedule, double t,
                                    std::size_t n, std::uint64_t seed, std::size_t workers = 1);
/// Moments of forward_marginal_sample rows [begin, end) without storing them.
MomentSummary forward_marginal_moments(const GaussianMixture& mixture, const Schedule& schedule, double t,
                                       std::size_t begin, std::size_t end, std::uint64_t seed, MomentMode mode,
                                       std::size_t workers = 1);

struct GaussianMoments {
  double mean;
  double variance;
};

/// Exact mean/variance of the chosen scheme's iterates for 1-d Gaussian data
/// N(data_mean, data_var) with the exact score; entry k is after k steps.
std::vector<GaussianMoments> moment_oracle_gaussian(const Schedule& schedule, const TimeGrid& grid,
                                                    double data_mean, double data_var, SamplerKind sampler,
                                                    InitKind init = InitKind::kStandardNormalSigmaT);
/// Throws UNSUPPORTED_DATA unless the mixture is a single 1-d Gaussian.
std::vector<GaussianMoments> moment_oracle_gaussian(const Schedule& schedule, const TimeGrid& grid,
                                                    const GaussianMixture& data, SamplerKind sampler,
                                                    InitKind init = InitKind::kStandardNormalSigmaT);

}  // namespace dsb
