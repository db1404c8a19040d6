#include "dsb/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dsb/error.hpp"

namespace dsb {

namespace {

constexpr double kWeightSumTolerance = 1e-12;
constexpr double kSingularPivotFloor = 1e-12;
const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

void check_dim(std::span<const double> x, std::size_t d) {
  if (x.size() != d)
    throw Error(ErrorCode::kDimensionMismatch,
                "expected dimension " + std::to_string(d) + ", got " + std::to_string(x.size()));
}

}  // namespace

GaussianMixture::GaussianMixture(Vector weights, std::vector<Vector> means, std::vector<Covariance> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  const std::size_t m = weights_.size();
  if (m == 0) throw Error(ErrorCode::kInvalidMixture, "mixture needs at least one component");
  if (means_.size() != m || covariances_.size() != m)
    throw Error(ErrorCode::kInvalidMixture, "weights, means and covariances must have equal length");
  dim_ = means_.front().size();
  if (dim_ == 0) throw Error(ErrorCode::kInvalidMixture, "dimension must be positive");

  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kInvalidMixture, "weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance)
    throw Error(ErrorCode::kInvalidMixture, "weights must sum to 1");

  factors_.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (means_[k].size() != dim_ || covariances_[k].dim() != dim_)
      throw Error(ErrorCode::kInvalidMixture, "component " + std::to_string(k) + " has inconsistent dimension");
    for (double v : means_[k])
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidMixture, "non-finite mean entry");
    const auto& cov = covariances_[k];
    if (cov.kind == CovarianceKind::kDiagonal) {
      for (double v : cov.diagonal)
        if (!(v > 0.0) || !std::isfinite(v))
          throw Error(ErrorCode::kInvalidMixture, "diagonal variances must be positive");
    } else {
      if (!cov.full.square()) throw Error(ErrorCode::kInvalidMixture, "covariance must be square");
      const double scale = std::max(1.0, cov.full.frobenius_norm());
      if (cov.full.asymmetry() > 1e-12 * scale)
        throw Error(ErrorCode::kInvalidMixture, "covariance must be symmetric");
      auto l = cholesky(cov.full);
      if (!l) throw Error(ErrorCode::kInvalidMixture, "covariance must be positive definite");
      factors_[k] = std::move(*l);
    }
  }
}

bool GaussianMixture::all_diagonal() const noexcept {
  return std::all_of(covariances_.begin(), covariances_.end(),
                     [](const Covariance& c) { return c.kind == CovarianceKind::kDiagonal; });
}

Vector GaussianMixture::mean() const {
  Vector mu(dim_, 0.0);
  for (std::size_t k = 0; k < components(); ++k)
    for (std::size_t i = 0; i < dim_; ++i) mu[i] += weights_[k] * means_[k][i];
  return mu;
}

Matrix GaussianMixture::covariance() const {
  const Vector mu = mean();
  Matrix cov(dim_, dim_);
  for (std::size_t k = 0; k < components(); ++k) {
    const double w = weights_[k];
    const auto& c = covariances_[k];
    for (std::size_t i = 0; i < dim_; ++i) {
      const double di = means_[k][i] - mu[i];
      for (std::size_t j = 0; j < dim_; ++j) {
        const double within = c.kind == CovarianceKind::kDiagonal ? (i == j ? c.diagonal[i] : 0.0) : c.full(i, j);
        cov(i, j) += w * (within + di * (means_[k][j] - mu[j]));
      }
    }
  }
  return cov;
}

Vector GaussianMixture::variance_diagonal() const {
  const Vector mu = mean();
  Vector var(dim_, 0.0);
  for (std::size_t k = 0; k < components(); ++k) {
    const auto& c = covariances_[k];
    for (std::size_t i = 0; i < dim_; ++i) {
      const double within = c.kind == CovarianceKind::kDiagonal ? c.diagonal[i] : c.full(i, i);
      const double di = means_[k][i] - mu[i];
      var[i] += weights_[k] * (within + di * di);
    }
  }
  return var;
}

std::size_t GaussianMixture::pick_component(double u) const noexcept {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < weights_.size(); ++k) {
    acc += weights_[k];
    if (u < acc) return k;
  }
  return weights_.size() - 1;
}

void GaussianMixture::transform_standard_normal(std::size_t k, std::span<const double> z,
                                                std::span<double> out) const {
  const auto& c = covariances_[k];
  const auto& mu = means_[k];
  if (c.kind == CovarianceKind::kDiagonal) {
    for (std::size_t i = 0; i < dim_; ++i) out[i] = mu[i] + std::sqrt(c.diagonal[i]) * z[i];
    return;
  }
  const Matrix& l = factors_[k];
  for (std::size_t i = 0; i < dim_; ++i) {
    double s = mu[i];
    auto li = l.row(i);
    for (std::size_t j = 0; j <= i; ++j) s += li[j] * z[j];
    out[i] = s;
  }
}

double GaussianMixture::single_gaussian_fisher_information() const {
  if (components() != 1) throw Error(ErrorCode::kUnsupportedData, "Fisher information needs a single Gaussian");
  const auto& c = covariances_.front();
  if (c.kind == CovarianceKind::kDiagonal) {
    double s = 0.0;
    for (double v : c.diagonal) s += 1.0 / v;
    return s;
  }
  // tr(Sigma^{-1}) from the Cholesky factor, column by column.
  double s = 0.0;
  std::vector<double> e(dim_);
  for (std::size_t j = 0; j < dim_; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    forward_substitute(factors_.front(), e);
    for (double v : e) s += v * v;
  }
  return s;
}

MarginalMixture::MarginalMixture(const GaussianMixture& mixture, const Schedule& schedule, double t)
    : time_(t), dim_(mixture.dim()) {
  const auto [decay, variance] = schedule.marginal_params(t);
  const double decay2 = decay * decay;
  const double half_log_two_pi_d = 0.5 * static_cast<double>(dim_) * kLogTwoPi;
  for (std::size_t k = 0; k < mixture.components(); ++k) {
    if (mixture.weights()[k] == 0.0) continue;
    Component comp;
    comp.mean.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) comp.mean[i] = decay * mixture.means()[k][i];
    const auto& cov = mixture.covariances()[k];
    double log_det = 0.0;
    if (cov.kind == CovarianceKind::kDiagonal) {
      comp.inv_diag.resize(dim_);
      for (std::size_t i = 0; i < dim_; ++i) {
        const double s = decay2 * cov.diagonal[i] + variance;
        if (!(s > 0.0) || !std::isfinite(s))
          throw Error(ErrorCode::kSingularCovariance, "marginal covariance of component " + std::to_string(k));
        comp.inv_diag[i] = 1.0 / s;
        log_det += std::log(s);
      }
    } else {
      Matrix s(dim_, dim_);
      for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < dim_; ++j) s(i, j) = decay2 * cov.full(i, j) + (i == j ? variance : 0.0);
      auto l = cholesky(s, kSingularPivotFloor);
      if (!l)
        throw Error(ErrorCode::kSingularCovariance,
                    "marginal covariance of component " + std::to_string(k) + " at t = " + std::to_string(t));
      for (std::size_t i = 0; i < dim_; ++i) log_det += 2.0 * std::log((*l)(i, i));
      comp.factor = std::move(*l);
      comp.dense = true;
    }
    comp.log_scale = std::log(mixture.weights()[k]) - half_log_two_pi_d - 0.5 * log_det;
    components_.push_back(std::move(comp));
  }
}

double MarginalMixture::evaluate_components(std::span<const double> x, ScoreWorkspace& ws) const {
  const std::size_t m = components_.size();
  ws.log_weights.resize(m);
  ws.scaled.resize(m * dim_);
  ws.tmp.resize(dim_);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& c = components_[k];
    double* z = ws.scaled.data() + k * dim_;
    double quad = 0.0;
    if (!c.dense) {
      for (std::size_t i = 0; i < dim_; ++i) {
        const double r = x[i] - c.mean[i];
        z[i] = r * c.inv_diag[i];
        quad += r * z[i];
      }
    } else {
      std::span<double> y(ws.tmp);
      for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] - c.mean[i];
      forward_substitute(c.factor, y);
      for (double v : y) quad += v * v;
      backward_substitute_transposed(c.factor, y);
      std::copy(y.begin(), y.end(), z);
    }
    ws.log_weights[k] = c.log_scale - 0.5 * quad;
    peak = std::max(peak, ws.log_weights[k]);
  }
  double total = 0.0;
  for (double lw : ws.log_weights) total += std::exp(lw - peak);
  return peak + std::log(total);
}

void MarginalMixture::score(std::span<const double> x, std::span<double> out, ScoreWorkspace& ws) const {
  const double log_p = evaluate_components(x, ws);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const double w = std::exp(ws.log_weights[k] - log_p);
    if (w == 0.0) continue;
    const double* z = ws.scaled.data() + k * dim_;
    for (std::size_t i = 0; i < dim_; ++i) out[i] -= w * z[i];
  }
}

double MarginalMixture::log_density(std::span<const double> x, ScoreWorkspace& ws) const {
  return evaluate_components(x, ws);
}

Vector mixture_score(const GaussianMixture& mixture, const Schedule& schedule, double t,
                     std::span<const double> x) {
  check_dim(x, mixture.dim());
  const MarginalMixture marginal(mixture, schedule, t);
  ScoreWorkspace ws;
  Vector out(mixture.dim());
  marginal.score(x, out, ws);
  return out;
}

double mixture_log_density(const GaussianMixture& mixture, const Schedule& schedule, double t,
                           std::span<const double> x) {
  check_dim(x, mixture.dim());
  const MarginalMixture marginal(mixture, schedule, t);
  ScoreWorkspace ws;
  return marginal.log_density(x, ws);
}

}  // namespace dsb
