#include "dsb/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "dsb/error.hpp"
#include "dsb/parallel.hpp"

namespace dsb {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <class Drift>
void em_kernel(std::span<const double> y, double h, double b, std::span<const double> dW, Drift&& drift,
               std::span<double> out, std::span<double> a0) {
  drift(y, a0);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a0[i] * h + b * dW[i];
}

struct SrkScratch {
  Vector a0, q, q_star, a_q, a_q_star;
  explicit SrkScratch(std::size_t d) : a0(d), q(d), q_star(d), a_q(d), a_q_star(d) {}
};

template <class Drift0, class DriftMid>
void srk_kernel(std::span<const double> y, double h, double b0, double b1, std::span<const double> dW,
                std::span<const double> beta, Drift0&& drift0, DriftMid&& drift_mid, std::span<double> out,
                SrkScratch& s) {
  const std::size_t d = y.size();
  const double sqrt_h = std::sqrt(h);
  drift0(y, std::span<double>(s.a0));
  for (std::size_t i = 0; i < d; ++i) {
    s.q[i] = y[i] + 0.5 * h * s.a0[i];
    s.q_star[i] = s.q[i] + 1.5 * b0 * sqrt_h * beta[i];
  }
  drift_mid(std::span<const double>(s.q), std::span<double>(s.a_q));
  drift_mid(std::span<const double>(s.q_star), std::span<double>(s.a_q_star));
  const double db = b1 - b0;
  for (std::size_t i = 0; i < d; ++i) {
    const double noise = b0 * dW[i] + db * (dW[i] - sqrt_h * beta[i]);
    out[i] = y[i] + h / 3.0 * (s.a_q[i] + 2.0 * s.a_q_star[i]) + noise;
  }
}

/// Coefficients and frozen score slices for every reverse step.
struct StepPlan {
  double f;       // f(tau_k)
  double g;       // g(tau_k)
  double g_next;  // g(tau_{k+1})
  double f_mid;   // f(tau_k - h/2)
  double g_mid;
};

class ReversePlan {
 public:
  ReversePlan(const ReverseConfig& cfg, const ScoreModel& model) : cfg_(cfg), model_(model) {
    const auto& grid = cfg.grid;
    const auto& sched = model.schedule();
    const auto [decay, variance] = sched.marginal_params(grid.terminal_time());
    terminal_decay_ = decay;
    terminal_sd_ = std::sqrt(variance);
    steps_.reserve(grid.steps());
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      const double tau = grid.tau(k);
      StepPlan p{sched.drift_rate(tau), sched.diffusion(tau), sched.diffusion(grid.tau(k + 1)), 0.0, 0.0};
      slices_.push_back(model.prepare(tau));
      if (cfg.sampler == SamplerKind::kSrk15) {
        const double tau_mid = tau - 0.5 * grid.h();
        p.f_mid = sched.drift_rate(tau_mid);
        p.g_mid = sched.diffusion(tau_mid);
        mid_slices_.push_back(model.prepare(tau_mid));
      }
      steps_.push_back(p);
    }
  }

  /// Runs trajectory `sample` into y. Returns the index of the first step
  /// that produced a non-finite state, if any.
  struct Worker {
    const ReversePlan& plan;
    CounterRng rng;
    ScoreWorkspace ws;
    Vector dW, beta, next, z;
    SrkScratch srk;
    ScoreMeter* meter;

    Worker(const ReversePlan& p, std::uint64_t seed, ScoreMeter* m)
        : plan(p), rng(seed), dW(p.dim()), beta(p.dim()), next(p.dim()), z(p.dim()), srk(p.dim()), meter(m) {}

    std::optional<std::size_t> run(std::uint64_t sample, std::span<double> y) {
      const auto& cfg = plan.cfg_;
      const auto& model = plan.model_;
      const std::size_t d = y.size();
      draw_initial(sample, y);
      if (!all_finite(y)) return 0;
      const double h = cfg.grid.h();
      for (std::size_t k = 0; k < plan.steps_.size(); ++k) {
        const StepPlan& p = plan.steps_[k];
        draw_increments(rng, sample, k, h, dW, beta);
        const MarginalMixture& slice = plan.slices_[k];
        auto drift0 = [&](std::span<const double> x, std::span<double> out) {
          model.evaluate(slice, x, out, ws, meter, k);
          const double g2 = p.g * p.g;
          for (std::size_t i = 0; i < d; ++i) out[i] = p.f * x[i] + g2 * out[i];
        };
        if (cfg.sampler == SamplerKind::kEulerMaruyama) {
          em_kernel(y, h, p.g, dW, drift0, next, srk.a0);
        } else {
          const MarginalMixture& mid = plan.mid_slices_[k];
          auto drift_mid = [&](std::span<const double> x, std::span<double> out) {
            model.evaluate(mid, x, out, ws, nullptr, k);
            const double g2 = p.g_mid * p.g_mid;
            for (std::size_t i = 0; i < d; ++i) out[i] = p.f_mid * x[i] + g2 * out[i];
          };
          srk_kernel(y, h, p.g, p.g_next, dW, beta, drift0, drift_mid, next, srk);
        }
        if (!all_finite(next)) {
          std::copy(next.begin(), next.end(), y.begin());
          return k;
        }
        std::copy(next.begin(), next.end(), y.begin());
      }
      return std::nullopt;
    }

    void draw_initial(std::uint64_t sample, std::span<double> y) {
      const auto& cfg = plan.cfg_;
      const std::size_t d = y.size();
      if (cfg.init == InitKind::kStandardNormalSigmaT) {
        for (std::size_t i = 0; i < d; ++i)
          y[i] = plan.terminal_sd_ * rng.normal_pair(sample, 0, static_cast<std::uint32_t>(i), Substream::kInit)[1];
        return;
      }
      const auto& mixture = plan.model_.mixture();
      const std::size_t comp = mixture.pick_component(rng.uniform_pair(sample, 0, 0, Substream::kComponent)[0]);
      for (std::size_t i = 0; i < d; ++i) {
        const auto pair = rng.normal_pair(sample, 0, static_cast<std::uint32_t>(i), Substream::kInit);
        z[i] = pair[0];
        next[i] = pair[1];
      }
      mixture.transform_standard_normal(comp, z, y);
      for (std::size_t i = 0; i < d; ++i) y[i] = plan.terminal_decay_ * y[i] + plan.terminal_sd_ * next[i];
    }
  };

  std::size_t dim() const noexcept { return model_.dim(); }

  std::uint64_t stream_seed() const noexcept {
    return derive_seed(cfg_.seed, 0x5A00u + static_cast<std::uint64_t>(cfg_.sampler));
  }

 private:
  const ReverseConfig& cfg_;
  const ScoreModel& model_;
  double terminal_decay_ = 1.0;
  double terminal_sd_ = 0.0;
  std::vector<StepPlan> steps_;
  std::vector<MarginalMixture> slices_;
  std::vector<MarginalMixture> mid_slices_;
};

struct ChunkStatus {
  std::optional<std::size_t> first_fail;
  ScoreMeter meter;
};

std::optional<std::size_t> earliest(std::optional<std::size_t> a, std::optional<std::size_t> b) {
  if (!a) return b;
  if (!b) return a;
  return std::min(*a, *b);
}

SampleMeta make_meta(const ReverseConfig& cfg, const ScoreModel& model) {
  SampleMeta meta;
  meta.seed = cfg.seed;
  meta.sampler = std::string(to_string(cfg.sampler));
  meta.schedule = model.schedule().description();
  meta.init = std::string(to_string(cfg.init));
  meta.h = cfg.grid.h();
  meta.terminal_time = cfg.grid.terminal_time();
  meta.steps = cfg.grid.steps();
  meta.score = model.describe();
  return meta;
}

void draw_forward(const GaussianMixture& mixture, double decay, double sd, const CounterRng& rng,
                  std::uint64_t sample, std::span<double> out, std::span<double> z, std::span<double> noise) {
  const std::size_t d = mixture.dim();
  const std::size_t comp = mixture.pick_component(rng.uniform_pair(sample, 0, 0, Substream::kComponent)[0]);
  for (std::size_t i = 0; i < d; ++i) {
    const auto pair = rng.normal_pair(sample, 0, static_cast<std::uint32_t>(i), Substream::kInit);
    z[i] = pair[0];
    noise[i] = pair[1];
  }
  mixture.transform_standard_normal(comp, z, out);
  for (std::size_t i = 0; i < d; ++i) out[i] = decay * out[i] + sd * noise[i];
}

}  // namespace

TimeGrid::TimeGrid(double terminal_time, std::size_t steps)
    : terminal_time_(terminal_time), steps_(steps), h_(steps > 0 ? terminal_time / static_cast<double>(steps) : 0.0) {
  if (!(terminal_time > 0.0) || !std::isfinite(terminal_time))
    throw Error(ErrorCode::kInvalidArgument, "terminal time must be positive");
}

TimeGrid TimeGrid::from_step(double terminal_time, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kNonPositiveStep, "step size must be positive");
  const double k = std::round(terminal_time / h);
  return TimeGrid(terminal_time, static_cast<std::size_t>(std::max(1.0, k)));
}

void draw_increments(const CounterRng& rng, std::uint64_t sample, std::size_t step, double h,
                     std::span<double> dW, std::span<double> beta) {
  const double sqrt_h = std::sqrt(h);
  const auto step32 = static_cast<std::uint32_t>(step);
  for (std::size_t i = 0; i < dW.size(); ++i) {
    const auto z = rng.normal_pair(sample, step32, static_cast<std::uint32_t>(i), Substream::kIncrement);
    std::tie(dW[i], beta[i]) = increments_from_normals(z[0], z[1], sqrt_h);
  }
}

BrownianDraw draw_increments(const CounterRng& rng, std::uint64_t sample, std::size_t step, std::size_t dim,
                             double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kNonPositiveStep, "step size must be positive");
  BrownianDraw draw{Vector(dim), Vector(dim)};
  draw_increments(rng, sample, step, h, draw.dW, draw.beta);
  return draw;
}

std::string_view to_string(SamplerKind kind) noexcept {
  return kind == SamplerKind::kEulerMaruyama ? "em" : "srk15";
}

std::string_view to_string(InitKind kind) noexcept {
  return kind == InitKind::kStandardNormalSigmaT ? "sigma" : "exact";
}

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "em") return SamplerKind::kEulerMaruyama;
  if (name == "srk15") return SamplerKind::kSrk15;
  throw Error(ErrorCode::kInvalidArgument, "unknown sampler '" + std::string(name) + "'");
}

InitKind parse_init_kind(std::string_view name) {
  if (name == "sigma") return InitKind::kStandardNormalSigmaT;
  if (name == "exact") return InitKind::kExactTerminal;
  throw Error(ErrorCode::kInvalidArgument, "unknown init '" + std::string(name) + "'");
}

Vector em_update(std::span<const double> y, double t_k, double h, double b_k, const BrownianDraw& draw,
                 const DriftFn& drift) {
  Vector out(y.size()), a0(y.size());
  em_kernel(y, h, b_k, draw.dW, [&](std::span<const double> x, std::span<double> o) { drift(t_k, x, o); }, out,
            a0);
  return out;
}

Vector srk_update(std::span<const double> y, double t_k, double h, double b_k, double b_next,
                  const BrownianDraw& draw, const DriftFn& drift) {
  Vector out(y.size());
  SrkScratch scratch(y.size());
  srk_kernel(
      y, h, b_k, b_next, draw.dW, draw.beta, [&](std::span<const double> x, std::span<double> o) { drift(t_k, x, o); },
      [&](std::span<const double> x, std::span<double> o) { drift(t_k + 0.5 * h, x, o); }, out, scratch);
  return out;
}

namespace {

DriftFn reverse_drift(const TimeGrid& grid, const Schedule& schedule, const ScoreModel& model) {
  return [&grid, &schedule, &model](double t, std::span<const double> x, std::span<double> out) {
    const double tau = std::max(0.0, grid.terminal_time() - t);
    const MarginalMixture slice(model.mixture(), schedule, tau);
    ScoreWorkspace ws;
    model.evaluate(slice, x, out, ws, nullptr, 0);
    const double f = schedule.drift_rate(tau);
    const double g = schedule.diffusion(tau);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f * x[i] + g * g * out[i];
  };
}

void check_step_inputs(std::span<const double> y, const ScoreModel& model, const BrownianDraw& draw) {
  if (y.size() != model.dim() || draw.dW.size() != y.size() || draw.beta.size() != y.size())
    throw Error(ErrorCode::kDimensionMismatch, "state, model and increments must share a dimension");
}

}  // namespace

Vector em_step(std::span<const double> y, std::size_t k, const TimeGrid& grid, const Schedule& schedule,
               const ScoreModel& model, const BrownianDraw& draw) {
  check_step_inputs(y, model, draw);
  const double t_k = grid.t(k);
  Vector out = em_update(y, t_k, grid.h(), schedule.diffusion(grid.tau(k)), draw, reverse_drift(grid, schedule, model));
  if (!all_finite(out)) throw Error(ErrorCode::kNonFiniteState, "EM step " + std::to_string(k));
  return out;
}

Vector srk_step(std::span<const double> y, std::size_t k, const TimeGrid& grid, const Schedule& schedule,
                const ScoreModel& model, const BrownianDraw& draw, double g_next) {
  check_step_inputs(y, model, draw);
  const double t_k = grid.t(k);
  Vector out = srk_update(y, t_k, grid.h(), schedule.diffusion(grid.tau(k)), g_next, draw,
                          reverse_drift(grid, schedule, model));
  if (!all_finite(out)) throw Error(ErrorCode::kNonFiniteState, "SRK step " + std::to_string(k));
  return out;
}

SampleBatch sample_reverse(const ReverseConfig& cfg, ScoreModel& model) {
  if (cfg.n < 1) throw Error(ErrorCode::kInvalidArgument, "sample_reverse needs n >= 1");
  const ReversePlan plan(cfg, model);
  SampleBatch batch;
  batch.n = cfg.n;
  batch.d = model.dim();
  batch.data.assign(batch.n * batch.d, 0.0);
  batch.meta = make_meta(cfg, model);

  std::vector<ChunkStatus> status(chunk_count(cfg.n));
  const std::uint64_t seed = plan.stream_seed();
  for_each_chunk(cfg.n, cfg.workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    ReversePlan::Worker worker(plan, seed, &status[c].meter);
    for (std::size_t i = begin; i < end; ++i)
      status[c].first_fail = earliest(status[c].first_fail, worker.run(i, batch.row(i)));
  });
  for (const auto& s : status) {
    model.meter().merge(s.meter);
    batch.meta.first_unstable_step = earliest(batch.meta.first_unstable_step, s.first_fail);
  }
  batch.meta.stable = !batch.meta.first_unstable_step.has_value();
  return batch;
}

ReverseMoments sample_reverse_moments(const ReverseConfig& cfg, const ScoreModel& model, MomentMode mode) {
  if (cfg.n < 2) throw Error(ErrorCode::kTooFewSamples, "need at least two trajectories for moments");
  const ReversePlan plan(cfg, model);
  const std::size_t d = model.dim();
  std::vector<ChunkStatus> status(chunk_count(cfg.n));
  std::vector<MomentAccumulator> parts(status.size(), MomentAccumulator(d, mode));
  const std::uint64_t seed = plan.stream_seed();
  for_each_chunk(cfg.n, cfg.workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    ReversePlan::Worker worker(plan, seed, &status[c].meter);
    Vector y(d);
    for (std::size_t i = begin; i < end; ++i) {
      const auto fail = worker.run(i, y);
      status[c].first_fail = earliest(status[c].first_fail, fail);
      if (!fail) parts[c].add(y);
    }
  });
  ReverseMoments result;
  MomentAccumulator total(d, mode);
  for (std::size_t c = 0; c < status.size(); ++c) {
    result.meter.merge(status[c].meter);
    result.first_unstable_step = earliest(result.first_unstable_step, status[c].first_fail);
    total.merge(parts[c]);
  }
  result.stable = !result.first_unstable_step.has_value();
  if (result.stable) result.moments = total.summary();
  return result;
}

SampleBatch forward_marginal_sample(const GaussianMixture& mixture, const Schedule& schedule, double t,
                                    std::size_t n, std::uint64_t seed, std::size_t workers) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "forward_marginal_sample needs n >= 1");
  const auto [decay, variance] = schedule.marginal_params(t);
  const double sd = std::sqrt(variance);
  const CounterRng rng(seed);
  SampleBatch batch;
  batch.n = n;
  batch.d = mixture.dim();
  batch.data.assign(n * batch.d, 0.0);
  batch.meta.seed = seed;
  batch.meta.sampler = "forward";
  batch.meta.schedule = schedule.description();
  batch.meta.terminal_time = t;
  for_each_chunk(n, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    Vector z(batch.d), noise(batch.d);
    for (std::size_t i = begin; i < end; ++i) draw_forward(mixture, decay, sd, rng, i, batch.row(i), z, noise);
  });
  return batch;
}

MomentSummary forward_marginal_moments(const GaussianMixture& mixture, const Schedule& schedule, double t,
                                       std::size_t begin, std::size_t end, std::uint64_t seed, MomentMode mode,
                                       std::size_t workers) {
  if (end < begin + 2) throw Error(ErrorCode::kTooFewSamples, "need at least two samples for moments");
  const auto [decay, variance] = schedule.marginal_params(t);
  const double sd = std::sqrt(variance);
  const CounterRng rng(seed);
  const std::size_t d = mixture.dim();
  const std::size_t count = end - begin;
  std::vector<MomentAccumulator> parts(chunk_count(count), MomentAccumulator(d, mode));
  for_each_chunk(count, workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    Vector x(d), z(d), noise(d);
    for (std::size_t i = lo; i < hi; ++i) {
      draw_forward(mixture, decay, sd, rng, begin + i, x, z, noise);
      parts[c].add(x);
    }
  });
  MomentAccumulator total(d, mode);
  for (const auto& p : parts) total.merge(p);
  return total.summary();
}

std::vector<GaussianMoments> moment_oracle_gaussian(const Schedule& schedule, const TimeGrid& grid,
                                                    double data_mean, double data_var, SamplerKind sampler,
                                                    InitKind init) {
  if (!(data_var > 0.0)) throw Error(ErrorCode::kUnsupportedData, "data variance must be positive");
  const double big_t = grid.terminal_time();
  const auto terminal = schedule.marginal_params(big_t);
  std::vector<GaussianMoments> out;
  out.reserve(grid.steps() + 1);
  double m = 0.0;
  double v = terminal.variance;
  if (init == InitKind::kExactTerminal) {
    m = terminal.mean_decay * data_mean;
    v = terminal.mean_decay * terminal.mean_decay * data_var + terminal.variance;
  }
  out.push_back({m, v});

  // With Gaussian data the reverse drift is affine: a(x) = alpha x + c.
  auto affine = [&](double tau) {
    const auto [decay, variance] = schedule.marginal_params(tau);
    const double g = schedule.diffusion(tau);
    const double s = decay * decay * data_var + variance;
    const double alpha = schedule.drift_rate(tau) - g * g / s;
    const double c = g * g * decay * data_mean / s;
    return std::pair{alpha, c};
  };

  const double h = grid.h();
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double tau = grid.tau(k);
    const double g0 = schedule.diffusion(tau);
    const auto [alpha0, c0] = affine(tau);
    double a_coef, b_coef, noise_var;
    if (sampler == SamplerKind::kEulerMaruyama) {
      a_coef = 1.0 + h * alpha0;
      b_coef = h * c0;
      noise_var = g0 * g0 * h;
    } else {
      const auto [alpha_mid, c_mid] = affine(tau - 0.5 * h);
      const double g1 = schedule.diffusion(grid.tau(k + 1));
      a_coef = 1.0 + h * alpha_mid * (1.0 + 0.5 * h * alpha0);
      b_coef = h * alpha_mid * 0.5 * h * c0 + h * c_mid;
      // Noise is g1 dW + sqrt(h) q beta with Cov(dW, beta) = sqrt(h)/2.
      const double q = h * alpha_mid * g0 - g1 + g0;
      noise_var = g1 * g1 * h + h * q * q / 3.0 + g1 * h * q;
    }
    m = a_coef * m + b_coef;
    v = a_coef * a_coef * v + noise_var;
    out.push_back({m, v});
  }
  return out;
}

std::vector<GaussianMoments> moment_oracle_gaussian(const Schedule& schedule, const TimeGrid& grid,
                                                    const GaussianMixture& data, SamplerKind sampler,
                                                    InitKind init) {
  if (data.components() != 1 || data.dim() != 1)
    throw Error(ErrorCode::kUnsupportedData, "moment oracle needs a single 1-d Gaussian");
  const auto& cov = data.covariances().front();
  const double var = cov.kind == CovarianceKind::kDiagonal ? cov.diagonal[0] : cov.full(0, 0);
  return moment_oracle_gaussian(schedule, grid, data.means().front()[0], var, sampler, init);
}

}  // namespace dsb
