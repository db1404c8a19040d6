#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "dsb/harness.hpp"
#include "dsb/metrics.hpp"
#include "dsb/sampler.hpp"
#include "dsb/score.hpp"

namespace {

std::shared_ptr<const dsb::GaussianMixture> problem(const char* name, std::size_t d) {
  return std::make_shared<const dsb::GaussianMixture>(dsb::builtin_problem(name, d));
}

void BM_MixtureScore(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto mix = problem("gmm", d);
  const dsb::MarginalMixture slice(*mix, dsb::make_vp_schedule(), 1.3);
  dsb::ScoreWorkspace ws;
  dsb::Vector x(d, 0.3), out(d);
  for (auto _ : state) {
    slice.score(x, out, ws);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MixtureScore)->Arg(16)->Arg(256)->Arg(3072);

void BM_DrawIncrements(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const dsb::CounterRng rng(1);
  dsb::Vector dw(d), beta(d);
  std::uint64_t sample = 0;
  for (auto _ : state) {
    dsb::draw_increments(rng, sample++, 3, 0.04, dw, beta);
    benchmark::DoNotOptimize(beta.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DrawIncrements)->Arg(16)->Arg(3072);

template <dsb::SamplerKind kSampler>
void BM_ReverseStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto sched = dsb::make_vp_schedule();
  const dsb::ScoreModel model(problem("gaussian", d), sched, dsb::Perturbation::none(), false);
  const dsb::TimeGrid grid(4.0, 100);
  const dsb::CounterRng rng(2);
  const auto draw = dsb::draw_increments(rng, 0, 0, d, grid.h());
  dsb::Vector y(d, 0.1);
  for (auto _ : state) {
    auto next = kSampler == dsb::SamplerKind::kSrk15
                    ? dsb::srk_step(y, 10, grid, sched, model, draw, sched.diffusion(grid.tau(11)))
                    : dsb::em_step(y, 10, grid, sched, model, draw);
    benchmark::DoNotOptimize(next.data());
  }
}
BENCHMARK(BM_ReverseStep<dsb::SamplerKind::kEulerMaruyama>)->Arg(16)->Arg(256);
BENCHMARK(BM_ReverseStep<dsb::SamplerKind::kSrk15>)->Arg(16)->Arg(256);

void BM_SampleReverseMoments(benchmark::State& state) {
  const dsb::ScoreModel model(problem("gaussian", 16), dsb::make_vp_schedule());
  dsb::ReverseConfig cfg;
  cfg.sampler = state.range(0) == 0 ? dsb::SamplerKind::kEulerMaruyama : dsb::SamplerKind::kSrk15;
  cfg.grid = dsb::TimeGrid(4.0, 100);
  cfg.n = 4096;
  for (auto _ : state) {
    auto r = dsb::sample_reverse_moments(cfg, model, dsb::MomentMode::kDiag);
    benchmark::DoNotOptimize(r.moments);
  }
  state.SetItemsProcessed(state.iterations() * cfg.n * cfg.grid.steps());
}
BENCHMARK(BM_SampleReverseMoments)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_JacobiSqrt(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  dsb::Matrix a(d, d);
  for (auto& v : a.data()) v = z(gen);
  const dsb::Matrix s = a.transposed() * a;
  for (auto _ : state) {
    auto r = dsb::sym_psd_sqrt(s);
    benchmark::DoNotOptimize(r.data().data());
  }
}
BENCHMARK(BM_JacobiSqrt)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
