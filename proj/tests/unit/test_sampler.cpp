#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "dsb/error.hpp"
#include "dsb/metrics.hpp"
#include "dsb/parallel.hpp"
#include "dsb/rng.hpp"
#include "dsb/sampler.hpp"

namespace {

using dsb::Covariance;
using dsb::GaussianMixture;
using dsb::Vector;

std::shared_ptr<const GaussianMixture> gaussian1d(double mean, double var) {
  return std::make_shared<const GaussianMixture>(GaussianMixture({1.0}, {{mean}}, {Covariance::diag({var})}));
}

dsb::BrownianDraw zero_draw(std::size_t d) { return {Vector(d, 0.0), Vector(d, 0.0)}; }

}  // namespace

// Known-answer vectors of the Philox4x32-10 reference implementation.
TEST(Philox, KnownAnswers) {
  using C = dsb::Philox4x32::Counter;
  using K = dsb::Philox4x32::Key;
  EXPECT_EQ(dsb::Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(dsb::Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(dsb::Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRng, StreamsAreDistinct) {
  const dsb::CounterRng rng(99);
  std::set<double> seen;
  for (auto sub : {dsb::Substream::kIncrement, dsb::Substream::kInit, dsb::Substream::kComponent})
    for (std::uint64_t s : {0ull, 1ull, (1ull << 32)})
      for (std::uint32_t step : {0u, 1u})
        for (std::uint32_t c : {0u, 1u}) seen.insert(rng.uniform_pair(s, step, c, sub)[0]);
  EXPECT_EQ(seen.size(), 3u * 3u * 2u * 2u);
  EXPECT_NE(dsb::derive_seed(1, 0), dsb::derive_seed(1, 1));
  EXPECT_NE(dsb::derive_seed(1, 0), dsb::derive_seed(2, 0));
}

TEST(CounterRng, UniformRange) {
  const dsb::CounterRng rng(5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto u = rng.uniform_pair(i, 0, 0, dsb::Substream::kAux);
    ASSERT_GE(u[0], 0.0);
    ASSERT_LT(u[0], 1.0);
    sum += u[0] + u[1];
  }
  EXPECT_NEAR(sum / (2.0 * n), 0.5, 4.0 * std::sqrt(1.0 / 12.0 / (2.0 * n)));
}

TEST(Increments, ZeroNormals) {
  const auto [dw, beta] = dsb::increments_from_normals(0.0, 0.0, 0.1);
  EXPECT_EQ(dw, 0.0);
  EXPECT_EQ(beta, 0.0);
}

TEST(Increments, JointLaw) {
  const double h = 0.01, sh = std::sqrt(h);
  const dsb::CounterRng rng(2024);
  const std::size_t n = 200000, d = 2;
  double sww = 0, sbb = 0, swb = 0;
  Vector dw(d), beta(d);
  for (std::size_t i = 0; i < n; ++i) {
    dsb::draw_increments(rng, i, 3, h, dw, beta);
    for (std::size_t c = 0; c < d; ++c) {
      sww += dw[c] * dw[c];
      sbb += beta[c] * beta[c];
      swb += dw[c] * sh * beta[c];
    }
  }
  const double m = static_cast<double>(n * d);
  // Standard errors of the Gaussian product moments.
  EXPECT_NEAR(sww / m, h, 4.0 * h * std::sqrt(2.0 / m));
  EXPECT_NEAR(sbb / m, 1.0 / 3.0, 4.0 * std::sqrt(2.0 / m) / 3.0);
  EXPECT_NEAR(swb / m, h / 2, 4.0 * std::sqrt((h * h / 3 + h * h / 4) / m));
}

TEST(Increments, RejectsNonPositiveStep) {
  const dsb::CounterRng rng(1);
  try {
    (void)dsb::draw_increments(rng, 0, 0, 2, 0.0);
    FAIL();
  } catch (const dsb::Error& e) {
    EXPECT_EQ(e.code(), dsb::ErrorCode::kNonPositiveStep);
  }
}

TEST(TimeGrid, Nodes) {
  const dsb::TimeGrid g(4.0, 100);
  EXPECT_DOUBLE_EQ(g.h(), 0.04);
  EXPECT_EQ(g.t(0), 0.0);
  EXPECT_EQ(g.t(100), 4.0);
  EXPECT_EQ(g.tau(0), 4.0);
  EXPECT_NEAR(g.h() * 100, 4.0, 1e-12);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_LT(g.t(k), g.t(k + 1));
  EXPECT_EQ(dsb::TimeGrid::from_step(4.0, 0.025).steps(), 160u);
  EXPECT_EQ(dsb::TimeGrid::from_step(0.01, 0.04).steps(), 1u);
  EXPECT_THROW(dsb::TimeGrid(0.0, 10), dsb::Error);
}

TEST(EmStep, DegenerateDynamicsKeepState) {
  const auto sched = dsb::make_generic_schedule([](double) { return 0.0; }, [](double) { return 0.0; }, 1e-2);
  dsb::ScoreModel model(gaussian1d(0.0, 1.0), sched);
  const dsb::TimeGrid grid(1.0, 10);
  const dsb::BrownianDraw draw{{0.3}, {0.1}};
  const Vector y{1.7};
  EXPECT_EQ(dsb::em_step(y, 2, grid, sched, model, draw)[0], 1.7);
  EXPECT_EQ(dsb::srk_step(y, 2, grid, sched, model, draw, 0.0)[0], 1.7);
}

TEST(EmStep, UnitGaussianUnderVp) {
  const auto sched = dsb::make_vp_schedule();
  dsb::ScoreModel model(gaussian1d(0.0, 1.0), sched);
  const dsb::TimeGrid grid(4.0, 100);
  for (std::size_t k : {0u, 17u, 99u}) {
    const double tau = grid.tau(k), h = grid.h();
    const double y = 0.8;
    const double expected = y * (1.0 + (sched.drift_rate(tau) - tau) * h);
    EXPECT_NEAR(dsb::em_step(Vector{y}, k, grid, sched, model, zero_draw(1))[0], expected, 1e-14);
  }
}

TEST(EmStep, SmallStepMagnitude) {
  const auto sched = dsb::make_vp_schedule();
  dsb::ScoreModel model(gaussian1d(0.5, 0.3), sched);
  const dsb::TimeGrid grid(1e-6 * 10, 10);
  const dsb::CounterRng rng(4);
  const Vector y{0.9};
  for (std::size_t k = 0; k < 10; ++k) {
    const auto draw = dsb::draw_increments(rng, 0, k, 1, grid.h());
    const double step = dsb::em_step(y, k, grid, sched, model, draw)[0] - y[0];
    const double bound = 10.0 * (grid.h() + sched.diffusion(grid.tau(k)) * std::abs(draw.dW[0]));
    EXPECT_LE(std::abs(step), bound);
  }
}

TEST(SrkUpdate, ReducesToSecondOrderRungeKutta) {
  const double lambda = -0.7, h = 0.05;
  const dsb::DriftFn drift = [&](double, std::span<const double> x, std::span<double> out) {
    out[0] = lambda * x[0];
  };
  const Vector y{1.3};
  const auto out = dsb::srk_update(y, 0.0, h, 0.0, 0.0, {{0.2}, {0.4}}, drift);
  const double lh = lambda * h;
  EXPECT_NEAR(out[0], y[0] * (1.0 + lh + lh * lh / 2), 1e-15);
}

TEST(SrkUpdate, PureBrownianStep) {
  const dsb::DriftFn zero = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  const auto out = dsb::srk_update(Vector{0.5}, 0.0, 0.01, 1.5, 1.5, {{0.07}, {0.9}}, zero);
  EXPECT_NEAR(out[0], 0.5 + 1.5 * 0.07, 1e-15);
}

TEST(SrkUpdate, LinearDriftAdditiveNoiseExact) {
  const double lambda = 0.4, h = 0.1, b = 0.8;
  const dsb::DriftFn drift = [&](double, std::span<const double> x, std::span<double> out) {
    out[0] = lambda * x[0];
  };
  const dsb::BrownianDraw draw{{0.05}, {-0.3}};
  const double y = 2.0;
  const double lh = lambda * h;
  const double expected = y * (1 + lh + lh * lh / 2) + lambda * h * b * std::sqrt(h) * draw.beta[0] + b * draw.dW[0];
  EXPECT_NEAR(dsb::srk_update(Vector{y}, 0.0, h, b, b, draw, drift)[0], expected, 1e-15);
}

TEST(EmUpdate, MatchesDefinition) {
  const dsb::DriftFn drift = [](double t, std::span<const double> x, std::span<double> out) {
    out[0] = t * x[0] + 1.0;
  };
  const auto out = dsb::em_update(Vector{2.0}, 0.5, 0.1, 0.3, {{0.2}, {0.0}}, drift);
  EXPECT_NEAR(out[0], 2.0 + 2.0 * 0.1 + 0.3 * 0.2, 1e-15);
}

TEST(SampleReverse, ZeroStepsReturnsInitialDraws) {
  const auto sched = dsb::make_vp_schedule();
  dsb::ScoreModel model(gaussian1d(1.0, 0.5), sched);
  dsb::ReverseConfig cfg;
  cfg.grid = dsb::TimeGrid(2.0, 0);
  cfg.n = 50000;
  cfg.seed = 8;
  const auto batch = dsb::sample_reverse(cfg, model);
  const auto m = dsb::accumulate_moments(batch, dsb::MomentMode::kDiag);
  const auto oracle = dsb::moment_oracle_gaussian(sched, cfg.grid, 1.0, 0.5, dsb::SamplerKind::kEulerMaruyama);
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_EQ(oracle[0].mean, 0.0);
  EXPECT_NEAR(oracle[0].variance, sched.variance(2.0), 1e-15);
  const double v = oracle[0].variance;
  EXPECT_NEAR(m.mean[0], 0.0, 4.0 * std::sqrt(v / cfg.n));
  EXPECT_NEAR(m.variance[0], v, 4.0 * v * std::sqrt(2.0 / cfg.n));
}

TEST(SampleReverse, DeterministicAcrossWorkers) {
  auto mix = std::make_shared<const GaussianMixture>(
      GaussianMixture({0.3, 0.7}, {{1.0, -1.0}, {-2.0, 0.5}}, {Covariance::diag({0.2, 0.4}), Covariance::diag({1.0, 0.1})}));
  for (auto sampler : {dsb::SamplerKind::kEulerMaruyama, dsb::SamplerKind::kSrk15}) {
    for (auto init : {dsb::InitKind::kStandardNormalSigmaT, dsb::InitKind::kExactTerminal}) {
      dsb::ReverseConfig cfg;
      cfg.sampler = sampler;
      cfg.init = init;
      cfg.grid = dsb::TimeGrid(3.0, 30);
      cfg.n = 3000;
      cfg.seed = 77;
      dsb::ScoreModel m1(mix, dsb::make_vp_schedule(), dsb::Perturbation::bias(0.2, 1));
      dsb::ScoreModel m4(mix, dsb::make_vp_schedule(), dsb::Perturbation::bias(0.2, 1));
      cfg.workers = 1;
      const auto a = dsb::sample_reverse(cfg, m1);
      cfg.workers = 4;
      const auto b = dsb::sample_reverse(cfg, m4);
      EXPECT_EQ(a.data, b.data);
      EXPECT_EQ(m1.metered_epsilon(), m4.metered_epsilon());
      dsb::ScoreModel again(mix, dsb::make_vp_schedule(), dsb::Perturbation::bias(0.2, 1));
      EXPECT_EQ(dsb::sample_reverse(cfg, again).data, a.data);
    }
  }
}

TEST(SampleReverse, SamplersUseIndependentStreams) {
  auto mix = gaussian1d(0.0, 1.0);
  dsb::ReverseConfig cfg;
  cfg.grid = dsb::TimeGrid(1.0, 1);
  cfg.n = 4;
  dsb::ScoreModel model(mix, dsb::make_vp_schedule());
  const auto em = dsb::sample_reverse(cfg, model);
  cfg.sampler = dsb::SamplerKind::kSrk15;
  const auto srk = dsb::sample_reverse(cfg, model);
  EXPECT_NE(em.data, srk.data);
}

TEST(SampleReverse, MomentsStreamMatchesBatch) {
  auto mix = gaussian1d(0.5, 0.2);
  dsb::ReverseConfig cfg;
  cfg.grid = dsb::TimeGrid(2.0, 20);
  cfg.n = 2500;
  cfg.seed = 12;
  dsb::ScoreModel model(mix, dsb::make_vp_schedule());
  const auto batch = dsb::sample_reverse(cfg, model);
  const auto direct = dsb::accumulate_moments(batch, dsb::MomentMode::kFull);
  const auto streamed = dsb::sample_reverse_moments(cfg, model, dsb::MomentMode::kFull);
  ASSERT_TRUE(streamed.moments.has_value());
  EXPECT_NEAR(streamed.moments->mean[0], direct.mean[0], 1e-14);
  EXPECT_NEAR(streamed.moments->covariance(0, 0), direct.covariance(0, 0), 1e-13);
}

TEST(SampleReverse, NonFiniteStateFlagsBatch) {
  auto mix = gaussian1d(0.0, 1.0);
  dsb::ScoreModel model(mix, dsb::make_vp_schedule(), dsb::Perturbation::multiplicative(1e200));
  dsb::ReverseConfig cfg;
  cfg.grid = dsb::TimeGrid(4.0, 4);
  cfg.n = 10;
  const auto batch = dsb::sample_reverse(cfg, model);
  EXPECT_FALSE(batch.meta.stable);
  ASSERT_TRUE(batch.meta.first_unstable_step.has_value());
  const auto moments = dsb::sample_reverse_moments(cfg, model, dsb::MomentMode::kDiag);
  EXPECT_FALSE(moments.stable);
  EXPECT_FALSE(moments.moments.has_value());
}

TEST(SampleReverse, MatchesMomentOracle) {
  const auto sched = dsb::make_vp_schedule();
  for (auto sampler : {dsb::SamplerKind::kEulerMaruyama, dsb::SamplerKind::kSrk15}) {
    for (auto init : {dsb::InitKind::kStandardNormalSigmaT, dsb::InitKind::kExactTerminal}) {
      dsb::ScoreModel model(gaussian1d(1.0, 0.5), sched);
      dsb::ReverseConfig cfg;
      cfg.sampler = sampler;
      cfg.init = init;
      cfg.grid = dsb::TimeGrid(4.0, 20);
      cfg.n = 40000;
      cfg.seed = 31;
      const auto m = dsb::sample_reverse_moments(cfg, model, dsb::MomentMode::kDiag).moments.value();
      const auto oracle = dsb::moment_oracle_gaussian(sched, cfg.grid, 1.0, 0.5, sampler, init).back();
      EXPECT_NEAR(m.mean[0], oracle.mean, 4.0 * std::sqrt(oracle.variance / cfg.n));
      EXPECT_NEAR(m.variance[0], oracle.variance, 4.0 * oracle.variance * std::sqrt(2.0 / cfg.n));
    }
  }
}

TEST(MomentOracle, FrozenDynamics) {
  const auto sched = dsb::make_generic_schedule([](double) { return 0.0; }, [](double) { return 0.0; }, 1e-2);
  const auto m = dsb::moment_oracle_gaussian(sched, dsb::TimeGrid(1.0, 5), 0.4, 2.0, dsb::SamplerKind::kSrk15,
                                             dsb::InitKind::kExactTerminal);
  for (const auto& e : m) {
    EXPECT_DOUBLE_EQ(e.mean, 0.4);
    EXPECT_DOUBLE_EQ(e.variance, 2.0);
  }
}

TEST(MomentOracle, RejectsUnsupportedData) {
  const GaussianMixture two({1.0}, {{0.0, 0.0}}, {Covariance::diag({1.0, 1.0})});
  try {
    (void)dsb::moment_oracle_gaussian(dsb::make_vp_schedule(), dsb::TimeGrid(1.0, 2), two,
                                      dsb::SamplerKind::kEulerMaruyama);
    FAIL();
  } catch (const dsb::Error& e) {
    EXPECT_EQ(e.code(), dsb::ErrorCode::kUnsupportedData);
  }
}

TEST(ForwardMarginal, ExactAndLimit) {
  const GaussianMixture mix({1.0}, {{2.0, -1.0}}, {Covariance::diag({1.0, 1.0})});
  const auto sched = dsb::make_vp_schedule();
  const std::size_t n = 40000;
  for (double t : {0.0, 1.0, 8.0}) {
    const auto batch = dsb::forward_marginal_sample(mix, sched, t, n, 6);
    const auto m = dsb::accumulate_moments(batch, dsb::MomentMode::kDiag);
    const auto p = sched.marginal_params(t);
    const double v = p.mean_decay * p.mean_decay + p.variance;
    EXPECT_NEAR(m.mean[0], 2.0 * p.mean_decay, 4.0 * std::sqrt(v / n));
    EXPECT_NEAR(m.mean[1], -p.mean_decay, 4.0 * std::sqrt(v / n));
    EXPECT_NEAR(m.variance[0], v, 4.0 * v * std::sqrt(2.0 / n));
  }
}

TEST(ForwardMarginal, MomentsMatchSample) {
  const GaussianMixture mix({0.5, 0.5}, {{-1.0}, {1.0}}, {Covariance::diag({0.1}), Covariance::diag({0.3})});
  const auto sched = dsb::make_vp_schedule();
  const auto batch = dsb::forward_marginal_sample(mix, sched, 0.5, 3000, 9);
  const auto a = dsb::accumulate_moments(batch, dsb::MomentMode::kDiag);
  const auto b = dsb::forward_marginal_moments(mix, sched, 0.5, 0, 3000, 9, dsb::MomentMode::kDiag);
  EXPECT_NEAR(a.mean[0], b.mean[0], 1e-14);
  EXPECT_NEAR(a.variance[0], b.variance[0], 1e-13);
}

TEST(Parallel, CoversEveryIndexOnce) {
  for (std::size_t workers : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(5000);
    dsb::for_each_chunk(hits.size(), workers, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) hits[i]++;
    }, 333);
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(dsb::for_each_chunk(10000, 4, [](std::size_t c, std::size_t, std::size_t) {
    if (c == 3) throw std::runtime_error("boom");
  }), std::runtime_error);
}
