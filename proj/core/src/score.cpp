#include "dsb/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dsb/error.hpp"
#include "dsb/parallel.hpp"
#include "dsb/rng.hpp"
#include "dsb/sampler.hpp"

namespace dsb {

std::string_view to_string(PerturbationKind kind) noexcept {
  switch (kind) {
    case PerturbationKind::kNone: return "none";
    case PerturbationKind::kAdditiveBias: return "bias";
    case PerturbationKind::kMultiplicative: return "mult";
    case PerturbationKind::kSmoothField: return "field";
  }
  return "none";
}

PerturbationKind parse_perturbation_kind(std::string_view name) {
  if (name == "none") return PerturbationKind::kNone;
  if (name == "bias") return PerturbationKind::kAdditiveBias;
  if (name == "mult") return PerturbationKind::kMultiplicative;
  if (name == "field") return PerturbationKind::kSmoothField;
  throw Error(ErrorCode::kInvalidArgument, "unknown perturbation '" + std::string(name) + "'");
}

std::string Perturbation::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind);
  switch (kind) {
    case PerturbationKind::kNone: break;
    case PerturbationKind::kAdditiveBias: os << "(delta=" << magnitude << ",seed=" << seed << ")"; break;
    case PerturbationKind::kMultiplicative: os << "(delta=" << magnitude << ")"; break;
    case PerturbationKind::kSmoothField:
      os << "(delta=" << magnitude << ",omega=" << frequency << ",seed=" << seed << ")";
      break;
  }
  return os.str();
}

Vector unit_direction(std::uint64_t seed, std::size_t dim) {
  const CounterRng rng(seed);
  Vector u(dim);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    u[i] = rng.normal_pair(0, 0, static_cast<std::uint32_t>(i), Substream::kDirection)[0];
    norm2 += u[i] * u[i];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : u) v *= inv;
  return u;
}

void ScoreMeter::record(std::size_t step, double squared_deviation) {
  if (step >= sums_.size()) {
    sums_.resize(step + 1, 0.0);
    counts_.resize(step + 1, 0);
  }
  sums_[step] += squared_deviation;
  ++counts_[step];
}

void ScoreMeter::merge(const ScoreMeter& other) {
  if (other.sums_.size() > sums_.size()) {
    sums_.resize(other.sums_.size(), 0.0);
    counts_.resize(other.counts_.size(), 0);
  }
  for (std::size_t k = 0; k < other.sums_.size(); ++k) {
    sums_[k] += other.sums_[k];
    counts_[k] += other.counts_[k];
  }
}

bool ScoreMeter::empty() const noexcept {
  return std::all_of(counts_.begin(), counts_.end(), [](std::uint64_t c) { return c == 0; });
}

std::vector<double> ScoreMeter::per_step_rms() const {
  std::vector<double> out(sums_.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < sums_.size(); ++k)
    if (counts_[k] > 0) out[k] = std::sqrt(sums_[k] / static_cast<double>(counts_[k]));
  return out;
}

double ScoreMeter::epsilon() const {
  if (empty()) throw Error(ErrorCode::kNoSamples, "score meter has no recorded evaluations");
  double sup = 0.0;
  for (double v : per_step_rms())
    if (!std::isnan(v)) sup = std::max(sup, v);
  return sup;
}

ScoreModel::ScoreModel(std::shared_ptr<const GaussianMixture> mixture, Schedule schedule, Perturbation perturbation,
                       bool metering)
    : mixture_(std::move(mixture)),
      schedule_(std::move(schedule)),
      perturbation_(perturbation),
      metering_(metering) {
  if (!mixture_) throw Error(ErrorCode::kInvalidArgument, "score model needs a mixture");
  if (perturbation_.kind == PerturbationKind::kAdditiveBias || perturbation_.kind == PerturbationKind::kSmoothField)
    direction_ = unit_direction(perturbation_.seed, mixture_->dim());
}

std::string ScoreModel::describe() const {
  return "mixture(m=" + std::to_string(mixture_->components()) + ",d=" + std::to_string(mixture_->dim()) +
         ")+" + perturbation_.describe();
}

void ScoreModel::evaluate(const MarginalMixture& slice, std::span<const double> x, std::span<double> out,
                          ScoreWorkspace& ws, ScoreMeter* meter, std::size_t step) const {
  slice.score(x, out, ws);
  const std::size_t d = x.size();
  double deviation = 0.0;
  switch (perturbation_.kind) {
    case PerturbationKind::kNone:
      break;
    case PerturbationKind::kAdditiveBias: {
      for (std::size_t i = 0; i < d; ++i) {
        const double shift = perturbation_.magnitude * direction_[i];
        out[i] += shift;
        deviation += shift * shift;
      }
      break;
    }
    case PerturbationKind::kMultiplicative: {
      for (std::size_t i = 0; i < d; ++i) {
        const double shift = perturbation_.magnitude * out[i];
        out[i] += shift;
        deviation += shift * shift;
      }
      break;
    }
    case PerturbationKind::kSmoothField: {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += x[i] * direction_[i];
      const double amp = perturbation_.magnitude * std::sin(perturbation_.frequency * proj);
      for (std::size_t i = 0; i < d; ++i) {
        const double shift = amp * direction_[i];
        out[i] += shift;
        deviation += shift * shift;
      }
      break;
    }
  }
  if (metering_ && meter != nullptr) meter->record(step, deviation);
}

Vector ScoreModel::evaluate(double t, std::span<const double> x, std::size_t step) {
  if (x.size() != dim())
    throw Error(ErrorCode::kDimensionMismatch,
                "expected dimension " + std::to_string(dim()) + ", got " + std::to_string(x.size()));
  const MarginalMixture slice = prepare(t);
  ScoreWorkspace ws;
  Vector out(dim());
  evaluate(slice, x, out, ws, &meter_, step);
  return out;
}

FisherEstimate fisher_information_estimate(const GaussianMixture& mixture, const Schedule& schedule, double t,
                                           std::size_t n, std::uint64_t seed, std::size_t workers) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "fisher_information_estimate needs n >= 1");
  const SampleBatch batch = forward_marginal_sample(mixture, schedule, t, n, seed, workers);
  const MarginalMixture marginal(mixture, schedule, t);
  struct Partial {
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  std::vector<Partial> parts(chunk_count(n));
  for_each_chunk(n, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    ScoreWorkspace ws;
    Vector s(mixture.dim());
    for (std::size_t i = begin; i < end; ++i) {
      marginal.score(batch.row(i), s, ws);
      double norm2 = 0.0;
      for (double v : s) norm2 += v * v;
      parts[c].sum += norm2;
      parts[c].sum_sq += norm2 * norm2;
    }
  });
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& p : parts) {
    sum += p.sum;
    sum_sq += p.sum_sq;
  }
  const double count = static_cast<double>(n);
  const double mean = sum / count;
  const double var = n > 1 ? std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0)) : 0.0;
  return {mean, std::sqrt(var / count)};
}

double fisher_information_bound(const Schedule& schedule, double data_fisher, std::size_t dim, double t_max,
                                std::size_t grid_points) {
  const double d = static_cast<double>(dim);
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double t = t_max * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(1, grid_points - 1));
    const auto [decay, variance] = schedule.marginal_params(t);
    lowest = std::min(lowest, decay * decay * d + variance * data_fisher);
  }
  return data_fisher * d / lowest;
}

}  // namespace dsb
