#include "dsb/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "dsb/error.hpp"

namespace dsb {

Schedule Schedule::vp_linear() {
  Schedule s;
  s.kind_ = ScheduleKind::kVpLinear;
  s.description_ = "vp-linear";
  return s;
}

Schedule Schedule::generic(Coefficient f, Coefficient g, double quadrature_step, std::string description) {
  if (!(quadrature_step > 0.0))
    throw Error(ErrorCode::kNonPositiveStep, "quadrature step must be positive");
  Schedule s;
  s.kind_ = ScheduleKind::kGeneric;
  s.f_ = std::make_shared<const Coefficient>(std::move(f));
  s.g_ = std::make_shared<const Coefficient>(std::move(g));
  s.quadrature_step_ = quadrature_step;
  s.description_ = std::move(description);
  return s;
}

double Schedule::drift_rate(double t) const {
  return kind_ == ScheduleKind::kVpLinear ? 0.5 * t : (*f_)(t);
}

double Schedule::diffusion(double t) const {
  return kind_ == ScheduleKind::kVpLinear ? std::sqrt(std::max(t, 0.0)) : (*g_)(t);
}

double Schedule::mean_decay(double t) const { return marginal_params(t).mean_decay; }
double Schedule::variance(double t) const { return marginal_params(t).variance; }

MarginalParams Schedule::marginal_params(double t) const {
  if (t < 0.0) throw Error(ErrorCode::kNegativeTime, "marginal_params requires t >= 0");
  if (t == 0.0) return {1.0, 0.0};
  if (kind_ == ScheduleKind::kVpLinear) {
    // -expm1 keeps full relative precision of the variance near t = 0.
    return {std::exp(-0.25 * t * t), -std::expm1(-0.5 * t * t)};
  }
  return integrate(t);
}

MarginalParams Schedule::integrate(double t) const {
  const auto& f = *f_;
  const auto& g = *g_;
  const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(t / quadrature_step_)));
  const double width = t / static_cast<double>(panels);
  const std::size_t nodes = 2 * panels + 1;

  // Cumulative F at every half-panel node; each half panel is itself a Simpson
  // panel using f at the quarter points.
  std::vector<double> big_f(nodes, 0.0);
  const double half = 0.5 * width;
  auto node_time = [&](std::size_t j) { return j == nodes - 1 ? t : static_cast<double>(j) * half; };
  double f_left = f(0.0);
  for (std::size_t j = 0; j + 1 < nodes; ++j) {
    const double a = node_time(j);
    const double b = node_time(j + 1);
    const double f_mid = f(0.5 * (a + b));
    const double f_right = f(b);
    big_f[j + 1] = big_f[j] + (b - a) / 6.0 * (f_left + 4.0 * f_mid + f_right);
    f_left = f_right;
  }

  const double f_total = big_f.back();
  auto integrand = [&](std::size_t j) {
    const double gs = g(node_time(j));
    return std::exp(-2.0 * (f_total - big_f[j])) * gs * gs;
  };
  double acc = 0.0;
  for (std::size_t i = 0; i < panels; ++i) {
    acc += integrand(2 * i) + 4.0 * integrand(2 * i + 1) + integrand(2 * i + 2);
  }
  return {std::exp(-f_total), acc * width / 6.0};
}

void PiecewisePolynomial::validate() const {
  if (coeffs.empty()) throw Error(ErrorCode::kBadConfig, "piecewise polynomial needs at least one piece");
  if (breaks.size() != coeffs.size())
    throw Error(ErrorCode::kBadConfig, "piecewise polynomial: one break (piece start) per coefficient list");
  if (!std::is_sorted(breaks.begin(), breaks.end()))
    throw Error(ErrorCode::kBadConfig, "piecewise polynomial breaks must be sorted");
  for (const auto& c : coeffs)
    if (c.empty()) throw Error(ErrorCode::kBadConfig, "piecewise polynomial piece has no coefficients");
}

double PiecewisePolynomial::operator()(double t) const {
  std::size_t piece = 0;
  while (piece + 1 < breaks.size() && t >= breaks[piece + 1]) ++piece;
  const auto& c = coeffs[piece];
  double value = 0.0;
  for (std::size_t j = c.size(); j-- > 0;) value = value * t + c[j];
  return value;
}

}  // namespace dsb
