#include "dsb/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dsb/error.hpp"
#include "dsb/io.hpp"

namespace dsb {

namespace {

constexpr double kUnstableJumpFactor = 10.0;
constexpr double kFloorExclusionFactor = 2.0;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TimeGrid cell_grid(const SweepConfig& cfg, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::kStepSize: return TimeGrid::from_step(cfg.terminal_time, value);
    case SweepAxis::kTerminalTime: return TimeGrid::from_step(value, cfg.h);
    case SweepAxis::kScoreError: return TimeGrid::from_step(cfg.terminal_time, cfg.h);
  }
  return TimeGrid::from_step(cfg.terminal_time, cfg.h);
}

CellResult simulate_cell(const SweepConfig& cfg, SweepAxis axis, const Problem& problem, double value,
                         std::uint64_t seed) {
  Perturbation perturbation = cfg.perturbation;
  if (axis == SweepAxis::kScoreError) perturbation.magnitude = value;
  const ScoreModel model(problem.mixture, problem.schedule, perturbation, true);
  ReverseConfig rc;
  rc.sampler = cfg.sampler;
  rc.grid = cell_grid(cfg, axis, value);
  rc.init = cfg.init;
  rc.n = cfg.n;
  rc.seed = seed;
  rc.workers = cfg.workers;
  const ReverseMoments run = sample_reverse_moments(rc, model, cfg.metric);

  CellResult cell;
  cell.finite = run.stable;
  cell.first_unstable_step = run.first_unstable_step;
  cell.eps = run.meter.empty() ? 0.0 : run.meter.epsilon();
  cell.w2 = run.moments ? gaussian_w2(*run.moments, problem.reference) : std::numeric_limits<double>::infinity();
  return cell;
}

}  // namespace

std::string_view to_string(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::kStepSize: return "h";
    case SweepAxis::kTerminalTime: return "T";
    case SweepAxis::kScoreError: return "eps";
  }
  return "h";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "h") return SweepAxis::kStepSize;
  if (name == "T") return SweepAxis::kTerminalTime;
  if (name == "eps") return SweepAxis::kScoreError;
  throw Error(ErrorCode::kInvalidArgument, "unknown sweep axis '" + std::string(name) + "'");
}

GaussianMixture builtin_problem(std::string_view name, std::size_t dim) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "problem dimension must be positive");
  const double span = dim > 1 ? static_cast<double>(dim - 1) : 1.0;
  if (name == "gaussian") {
    Vector mean(dim), var(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      mean[i] = i % 2 == 0 ? 2.0 : -2.0;
      var[i] = 0.05 + 0.15 * static_cast<double>(i) / span;
    }
    return GaussianMixture({1.0}, {mean}, {Covariance::diag(var)});
  }
  if (name == "gmm") {
    std::vector<Vector> means;
    std::vector<Covariance> covs;
    for (std::size_t k = 0; k < 4; ++k) {
      Vector mean(dim);
      for (std::size_t i = 0; i < dim; ++i) mean[i] = (i + k) % 4 < 2 ? 2.0 : -2.0;
      means.push_back(std::move(mean));
      covs.push_back(Covariance::diag(Vector(dim, 0.1)));
    }
    return GaussianMixture({0.25, 0.25, 0.25, 0.25}, std::move(means), std::move(covs));
  }
  if (name == "std-normal") {
    return GaussianMixture({1.0}, {Vector(dim, 0.0)}, {Covariance::diag(Vector(dim, 1.0))});
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown builtin problem '" + std::string(name) + "'");
}

Schedule ScheduleSpec::build() const {
  if (kind == "vp-linear") return Schedule::vp_linear();
  if (kind == "generic") {
    f.validate();
    g.validate();
    return Schedule::generic(f, g, quadrature_step, "generic");
  }
  throw Error(ErrorCode::kBadConfig, "unknown schedule '" + kind + "'");
}

void SweepConfig::validate(SweepAxis axis) const {
  if (values.empty()) throw Error(ErrorCode::kBadConfig, "swept value list is empty");
  for (double v : values) {
    const bool ok = axis == SweepAxis::kScoreError ? v >= 0.0 : v > 0.0;
    if (!ok || !std::isfinite(v)) throw Error(ErrorCode::kBadConfig, "swept values must be positive and finite");
  }
  const bool ascending = std::adjacent_find(values.begin(), values.end(), std::greater_equal<>()) == values.end();
  const bool descending = std::adjacent_find(values.begin(), values.end(), std::less_equal<>()) == values.end();
  if (!ascending && !descending) throw Error(ErrorCode::kBadConfig, "swept values must be strictly sorted");
  if (n < 2) throw Error(ErrorCode::kBadConfig, "n must be at least 2");
  if (!(h > 0.0) || !(terminal_time > 0.0)) throw Error(ErrorCode::kBadConfig, "h and T must be positive");
  if (!(window_min <= window_max)) throw Error(ErrorCode::kBadConfig, "window bounds are inverted");
}

Problem resolve_problem(const SweepConfig& cfg) {
  Problem p;
  if (!cfg.problem.mixture_file.empty()) {
    p.mixture = std::make_shared<const GaussianMixture>(load_mixture(cfg.problem.mixture_file));
  } else {
    p.mixture = std::make_shared<const GaussianMixture>(builtin_problem(cfg.problem.builtin, cfg.problem.dim));
  }
  p.schedule = cfg.schedule.build();
  if (!cfg.reference_file.empty()) {
    const SampleBatch ref = read_samples(cfg.reference_file);
    if (ref.d != p.mixture->dim())
      throw Error(ErrorCode::kDimensionMismatch, "reference samples do not match the problem dimension");
    p.reference = accumulate_moments(ref, cfg.metric, cfg.workers);
    p.analytic_reference = false;
  } else {
    p.reference = analytic_moments(*p.mixture, cfg.metric);
  }
  return p;
}

double estimate_mc_floor(const SweepConfig& cfg, const Problem& problem) {
  const std::size_t half = cfg.n / 2;
  if (half < 2) return 0.0;
  MomentSummary a, b;
  if (problem.analytic_reference) {
    const std::uint64_t seed = derive_seed(cfg.seed, 0xF1002u);
    a = forward_marginal_moments(*problem.mixture, problem.schedule, 0.0, 0, half, seed, cfg.metric, cfg.workers);
    b = forward_marginal_moments(*problem.mixture, problem.schedule, 0.0, half, 2 * half, seed, cfg.metric,
                                 cfg.workers);
  } else {
    const SampleBatch ref = read_samples(cfg.reference_file);
    const std::size_t rh = ref.n / 2;
    if (rh < 2) return 0.0;
    MomentAccumulator acc_a(ref.d, cfg.metric), acc_b(ref.d, cfg.metric);
    for (std::size_t i = 0; i < rh; ++i) acc_a.add(ref.row(i));
    for (std::size_t i = rh; i < 2 * rh; ++i) acc_b.add(ref.row(i));
    a = acc_a.summary();
    b = acc_b.summary();
  }
  // Each half carries sqrt(2) times the error of an n-batch and the two
  // errors add in quadrature, hence the factor 1/2.
  return 0.5 * gaussian_w2(a, b);
}

std::vector<std::size_t> classify_rows(std::vector<SweepRow>& rows, SweepAxis axis, double window_min,
                                       double window_max, double mc_floor) {
  const std::size_t count = rows.size();
  std::vector<bool> finite(count);
  for (std::size_t i = 0; i < count; ++i) finite[i] = rows[i].finite && std::isfinite(rows[i].w2);
  for (std::size_t i = 0; i < count; ++i) {
    bool stable = finite[i];
    if (stable) {
      double neighbour = 0.0;
      bool has_neighbour = false;
      for (std::size_t j : {i - 1, i + 1}) {
        if (j < count && finite[j]) {
          neighbour = std::max(neighbour, rows[j].w2);
          has_neighbour = true;
        }
      }
      if (has_neighbour && rows[i].w2 > kUnstableJumpFactor * neighbour) stable = false;
    }
    rows[i].stable = stable;
  }

  std::vector<std::size_t> admitted;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = rows[i];
    if (!r.stable) continue;
    const double x = axis == SweepAxis::kScoreError ? r.eps : r.value;
    if (!(x > 0.0) || x < window_min || x > window_max) continue;
    if (!(r.w2 > 0.0) || r.w2 < kFloorExclusionFactor * mc_floor) continue;
    admitted.push_back(i);
  }
  return admitted;
}

ConvergenceReport run_sweep(const SweepConfig& cfg, SweepAxis axis, const SweepHooks& hooks) {
  cfg.validate(axis);
  const auto start = std::chrono::steady_clock::now();
  ConvergenceReport report;
  report.axis = axis;
  report.config = cfg;

  std::optional<Problem> problem;
  if (!hooks.evaluate || !hooks.mc_floor) problem = resolve_problem(cfg);
  report.mc_floor = hooks.mc_floor ? *hooks.mc_floor : estimate_mc_floor(cfg, *problem);

  for (std::size_t i = 0; i < cfg.values.size(); ++i) {
    const auto cell_start = std::chrono::steady_clock::now();
    const double value = cfg.values[i];
    const std::uint64_t seed = cell_seed(cfg.seed, i);
    SweepRow row;
    row.value = value;
    row.n = cfg.n;
    row.seed = seed;
    CellResult cell;
    try {
      cell = hooks.evaluate ? hooks.evaluate(cfg, i, value, seed) : simulate_cell(cfg, axis, *problem, value, seed);
    } catch (const Error& e) {
      // A failing cell is recorded as unstable; the sweep goes on.
      cell.finite = false;
      cell.w2 = std::numeric_limits<double>::infinity();
    }
    row.w2 = cell.w2;
    row.eps = cell.eps;
    row.finite = cell.finite;
    row.first_unstable_step = cell.first_unstable_step;
    row.wall_seconds = seconds_since(cell_start);
    report.rows.push_back(row);
  }

  report.fit_rows = classify_rows(report.rows, axis, cfg.window_min, cfg.window_max, report.mc_floor);

  if (axis == SweepAxis::kTerminalTime) {
    report.fit_status = "not-applicable";
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : report.rows)
      if (r.stable && r.w2 < best) {
        best = r.w2;
        report.argmin = r.value;
      }
  } else {
    std::vector<SlopePoint> points;
    for (std::size_t i : report.fit_rows) {
      const auto& r = report.rows[i];
      points.push_back({axis == SweepAxis::kScoreError ? r.eps : r.value, r.w2});
    }
    try {
      report.fit = fit_log_slope(points);
      report.fit_status = "ok";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateFit) throw;
      report.fit_status = "DEGENERATE_FIT";
    }
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

ParamChoice param_choice(double h, double m0, double mg) {
  if (!(h > 0.0 && h < 1.0)) throw Error(ErrorCode::kInvalidH, "step size must lie in (0, 1)");
  if (!(m0 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "m0 must be positive");
  if (!(mg >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "mg must be non-negative");
  ParamChoice out;
  out.constant_c = m0 * mg * mg / (1.0 + m0);
  out.epsilon_target = std::sqrt(h);
  out.terminal_time = -std::log(std::sqrt(h)) / (out.constant_c + 1.0);
  out.predicted_rate_exponent = out.constant_c / (2.0 * (out.constant_c + 1.0));
  out.zero_c_warning = out.constant_c == 0.0;
  return out;
}

}  // namespace dsb
