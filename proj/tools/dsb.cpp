// Command-line front end: sampling, W2 evaluation, slope fits and sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dsb/error.hpp"
#include "dsb/harness.hpp"
#include "dsb/io.hpp"
#include "dsb/metrics.hpp"
#include "dsb/sampler.hpp"
#include "dsb/score.hpp"

namespace {

using nlohmann::json;

json summary_json(const dsb::MomentSummary& s) {
  json j;
  j["mode"] = std::string(dsb::to_string(s.mode));
  j["n"] = s.n;
  j["mean"] = s.mean;
  if (s.mode == dsb::MomentMode::kDiag) {
    j["variance"] = s.variance;
  } else {
    json rows = json::array();
    for (std::size_t i = 0; i < s.covariance.rows(); ++i) {
      auto r = s.covariance.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["covariance"] = std::move(rows);
  }
  return j;
}

json fit_json(const dsb::SlopeFit& fit) {
  return {{"intercept", fit.intercept},
          {"exponent", fit.exponent},
          {"points", fit.points},
          {"residual_norm", fit.residual_norm}};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dsb::Error(dsb::ErrorCode::kIoFailure, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct SampleArgs {
  std::string sampler = "em";
  double h = 0.04;
  double terminal_time = 4.0;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string init = "sigma";
  std::string mixture;
  std::string problem = "gaussian";
  std::size_t dim = 16;
  std::string perturb = "none";
  double perturb_mag = 0.0;
  std::uint64_t perturb_seed = 0;
  double perturb_freq = 1.0;
  std::string out;
  bool f32 = false;
  std::size_t workers = 1;
  std::string schedule_file;
};

int run_sample(const SampleArgs& a) {
  auto mixture = std::make_shared<const dsb::GaussianMixture>(
      a.mixture.empty() ? dsb::builtin_problem(a.problem, a.dim) : dsb::load_mixture(a.mixture));
  dsb::ScheduleSpec spec;
  if (!a.schedule_file.empty()) spec = dsb::parse_schedule_spec(slurp(a.schedule_file));
  dsb::Perturbation p{dsb::parse_perturbation_kind(a.perturb), a.perturb_mag, a.perturb_seed, a.perturb_freq};
  dsb::ScoreModel model(mixture, spec.build(), p);

  dsb::ReverseConfig cfg;
  cfg.sampler = dsb::parse_sampler_kind(a.sampler);
  cfg.grid = dsb::TimeGrid::from_step(a.terminal_time, a.h);
  cfg.init = dsb::parse_init_kind(a.init);
  cfg.n = a.n;
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  const dsb::SampleBatch batch = dsb::sample_reverse(cfg, model);
  if (!batch.meta.stable) {
    std::fprintf(stderr, "warning: trajectories went non-finite from step %zu\n", *batch.meta.first_unstable_step);
  }
  dsb::write_samples(batch, a.out, a.f32 ? dsb::ScalarWidth::kF32 : dsb::ScalarWidth::kF64);

  json j;
  j["out"] = a.out;
  j["n"] = batch.n;
  j["d"] = batch.d;
  j["stable"] = batch.meta.stable;
  j["metered_eps"] = model.meter().empty() ? 0.0 : model.metered_epsilon();
  std::cout << j.dump(2) << '\n';
  return batch.meta.stable ? 0 : 3;
}

int run_w2(const std::string& path_a, const std::string& path_b, const std::string& mixture_b,
           const std::string& mode_name, std::size_t workers) {
  const dsb::MomentMode mode = dsb::parse_moment_mode(mode_name);
  const dsb::MomentSummary a = dsb::accumulate_moments(dsb::read_samples(path_a), mode, workers);
  const dsb::MomentSummary b = path_b.empty() ? dsb::analytic_moments(dsb::load_mixture(mixture_b), mode)
                                               : dsb::accumulate_moments(dsb::read_samples(path_b), mode, workers);
  json j;
  j["w2"] = dsb::gaussian_w2(a, b);
  j["mode"] = std::string(dsb::to_string(mode));
  j["a"] = summary_json(a);
  j["b"] = summary_json(b);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_fit(const std::string& csv, double lo, double hi) {
  std::vector<dsb::SlopePoint> points;
  for (const auto& p : dsb::read_report_points(csv))
    if (p.abscissa >= lo && p.abscissa <= hi) points.push_back(p);
  std::cout << fit_json(dsb::fit_log_slope(points)).dump(2) << '\n';
  return 0;
}

int run_sweep_cmd(dsb::SweepAxis axis, const std::string& config, const std::string& out,
                  std::optional<std::size_t> workers) {
  dsb::SweepConfig cfg = dsb::load_sweep_config(config);
  if (workers) cfg.workers = *workers;
  const dsb::ConvergenceReport report = dsb::run_sweep(cfg, axis);
  dsb::write_report(report, out);
  json j;
  j["csv"] = out + ".csv";
  j["json"] = out + ".json";
  j["fit_status"] = report.fit_status;
  j["fit"] = report.fit ? fit_json(*report.fit) : json(nullptr);
  j["argmin"] = report.argmin ? json(*report.argmin) : json(nullptr);
  j["mc_floor"] = report.mc_floor;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_param_choice(double h, double m0, double mg) {
  const dsb::ParamChoice pc = dsb::param_choice(h, m0, mg);
  if (pc.zero_c_warning) std::fprintf(stderr, "warning: ZERO_C: mg = 0 makes C = 0 and the rule degenerates\n");
  json j = {{"C", pc.constant_c},
            {"epsilon_target", pc.epsilon_target},
            {"T_choice", pc.terminal_time},
            {"predicted_rate_exponent", pc.predicted_rate_exponent},
            {"zero_c_warning", pc.zero_c_warning}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reverse-time diffusion sampling and W2 convergence sweeps"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Simulate reverse trajectories and write a sample file");
  sample->add_option("--sampler", sa.sampler, "em|srk15")->capture_default_str();
  sample->add_option("--h", sa.h, "Step size")->capture_default_str();
  sample->add_option("--T", sa.terminal_time, "Terminal time")->capture_default_str();
  sample->add_option("--n", sa.n, "Number of samples")->capture_default_str();
  sample->add_option("--seed", sa.seed, "Base seed")->capture_default_str();
  sample->add_option("--init", sa.init, "sigma|exact")->capture_default_str();
  auto* mix_opt = sample->add_option("--mixture", sa.mixture, "Mixture JSON file");
  sample->add_option("--problem", sa.problem, "Builtin problem when no mixture is given")
      ->capture_default_str()
      ->excludes(mix_opt);
  sample->add_option("--dim", sa.dim, "Builtin problem dimension")->capture_default_str()->excludes(mix_opt);
  sample->add_option("--perturb", sa.perturb, "none|bias|mult|field")->capture_default_str();
  sample->add_option("--perturb-mag", sa.perturb_mag, "Perturbation magnitude")->capture_default_str();
  sample->add_option("--perturb-seed", sa.perturb_seed, "Perturbation seed")->capture_default_str();
  sample->add_option("--perturb-freq", sa.perturb_freq, "Smooth-field frequency")->capture_default_str();
  sample->add_option("--schedule-file", sa.schedule_file, "Schedule JSON (default vp-linear)");
  sample->add_option("--out", sa.out, "Output sample file")->required();
  sample->add_flag("--f32", sa.f32, "Store f32 scalars");
  sample->add_option("--workers", sa.workers, "Worker threads (0 = all cores)")->capture_default_str();

  std::string w2_a, w2_b, w2_mix, w2_mode = "diag";
  std::size_t w2_workers = 1;
  auto* w2 = app.add_subcommand("w2", "Gaussian W2 between two sample files or a file and a mixture");
  w2->add_option("--a", w2_a, "Sample file")->required();
  auto* b_opt = w2->add_option("--b", w2_b, "Second sample file");
  auto* bm_opt = w2->add_option("--b-mixture", w2_mix, "Mixture JSON file")->excludes(b_opt);
  b_opt->excludes(bm_opt);
  w2->add_option("--mode", w2_mode, "diag|full")->capture_default_str();
  w2->add_option("--workers", w2_workers, "Worker threads")->capture_default_str();

  std::string fit_csv;
  double h_min = 0.0, h_max = std::numeric_limits<double>::infinity();
  auto* fit = app.add_subcommand("fit-slope", "Least-squares log-log slope of a report CSV");
  fit->add_option("--csv", fit_csv, "Report CSV")->required();
  fit->add_option("--h-min", h_min, "Smallest abscissa in the window");
  fit->add_option("--h-max", h_max, "Largest abscissa in the window");

  struct SweepArgs {
    std::string config, out;
    std::optional<std::size_t> workers;
  };
  SweepArgs sweep_args[3];
  const char* sweep_names[3] = {"sweep-h", "sweep-T", "sweep-eps"};
  const char* sweep_help[3] = {"W2 versus step size", "W2 versus terminal time", "W2 versus score error"};
  CLI::App* sweeps[3];
  for (int i = 0; i < 3; ++i) {
    sweeps[i] = app.add_subcommand(sweep_names[i], sweep_help[i]);
    sweeps[i]->add_option("--config", sweep_args[i].config, "Sweep config JSON")->required();
    sweeps[i]->add_option("--out", sweep_args[i].out, "Output prefix for .csv and .json")->required();
    sweeps[i]->add_option("--workers", sweep_args[i].workers, "Override worker threads");
  }

  double pc_h = 0.01, pc_m0 = 1.0, pc_mg = 1.0;
  auto* pc = app.add_subcommand("param-choice", "Step-size driven choice of eps and T");
  pc->add_option("--h", pc_h, "Step size in (0, 1)")->required();
  pc->add_option("--m0", pc_m0, "Strong log-concavity constant of the data")->required();
  pc->add_option("--mg", pc_mg, "Lower bound of g over [0, T]")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) return run_sample(sa);
    if (*w2) {
      if (w2_b.empty() && w2_mix.empty()) throw CLI::RequiredError("--b or --b-mixture");
      return run_w2(w2_a, w2_b, w2_mix, w2_mode, w2_workers);
    }
    if (*fit) return run_fit(fit_csv, h_min, h_max);
    const dsb::SweepAxis axes[3] = {dsb::SweepAxis::kStepSize, dsb::SweepAxis::kTerminalTime,
                                    dsb::SweepAxis::kScoreError};
    for (int i = 0; i < 3; ++i)
      if (*sweeps[i]) return run_sweep_cmd(axes[i], sweep_args[i].config, sweep_args[i].out, sweep_args[i].workers);
    if (*pc) return run_param_choice(pc_h, pc_m0, pc_mg);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const dsb::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
