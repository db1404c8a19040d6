#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dsb/linalg.hpp"
#include "dsb/schedule.hpp"

namespace dsb {

enum class CovarianceKind { kDiagonal, kFull };

struct Covariance {
  CovarianceKind kind = CovarianceKind::kDiagonal;
  Vector diagonal;  // variances, when kind == kDiagonal
  Matrix full;      // when kind == kFull

  static Covariance diag(Vector variances) { return {CovarianceKind::kDiagonal, std::move(variances), {}}; }
  static Covariance dense(Matrix m) { return {CovarianceKind::kFull, {}, std::move(m)}; }

  std::size_t dim() const noexcept { return kind == CovarianceKind::kDiagonal ? diagonal.size() : full.rows(); }
};

/// Data distribution sum_k xi_k N(mu_k, Sigma_k). Construction validates the
/// weights (non-negative, summing to 1 within 1e-12) and that every covariance
/// is symmetric positive definite; failures throw INVALID_MIXTURE.
class GaussianMixture {
 public:
  GaussianMixture(Vector weights, std::vector<Vector> means, std::vector<Covariance> covariances);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t components() const noexcept { return weights_.size(); }
  const Vector& weights() const noexcept { return weights_; }
  const std::vector<Vector>& means() const noexcept { return means_; }
  const std::vector<Covariance>& covariances() const noexcept { return covariances_; }
  bool all_diagonal() const noexcept;

  /// Exact moments of the mixture, including the between-component spread.
  Vector mean() const;
  Matrix covariance() const;
  Vector variance_diagonal() const;

  /// Index of the component selected by a uniform u in [0, 1).
  std::size_t pick_component(double u) const noexcept;
  /// out = mu_k + Sigma_k^{1/2} z (Cholesky factor for dense covariances).
  void transform_standard_normal(std::size_t k, std::span<const double> z, std::span<double> out) const;

  /// Sum over coordinates of 1/Sigma_ii for a single Gaussian; the Fisher
  /// information trace tr(Sigma^{-1}) in general. Only defined for m = 1.
  double single_gaussian_fisher_information() const;

 private:
  std::size_t dim_ = 0;
  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Covariance> covariances_;
  std::vector<Matrix> factors_;  // Cholesky factors of dense covariances (empty for diagonal)
};

/// Scratch buffers for repeated score evaluation; one per worker.
struct ScoreWorkspace {
  std::vector<double> log_weights;
  std::vector<double> scaled;  // m x d rows of Sigma_{k,t}^{-1}(x - phi mu_k)
  std::vector<double> tmp;
};

/// The forward marginal p_t = sum_k xi_k N(phi_f(t) mu_k, phi_f(t)^2 Sigma_k + phi_fg(t) I)
/// frozen at one time t. Factorizations are done once at construction.
class MarginalMixture {
 public:
  /// Throws SINGULAR_COVARIANCE if some Sigma_{k,t} fails factorization.
  MarginalMixture(const GaussianMixture& mixture, const Schedule& schedule, double t);

  double time() const noexcept { return time_; }
  std::size_t dim() const noexcept { return dim_; }

  /// out = grad log p_t(x), combining components with a log-sum-exp softmax.
  void score(std::span<const double> x, std::span<double> out, ScoreWorkspace& ws) const;
  double log_density(std::span<const double> x, ScoreWorkspace& ws) const;

 private:
  struct Component {
    double log_scale;  // log xi_k - d/2 log(2 pi) - 1/2 log det Sigma_{k,t}
    Vector mean;
    Vector inv_diag;  // diagonal case
    Matrix factor;    // dense case: Cholesky factor of Sigma_{k,t}
    bool dense = false;
  };

  /// Fills ws.log_weights (unnormalized) and ws.scaled; returns log p_t(x).
  double evaluate_components(std::span<const double> x, ScoreWorkspace& ws) const;

  double time_;
  std::size_t dim_;
  std::vector<Component> components_;
};

/// Exact score s(t, x) = -sum_k w_k(x) Sigma_{k,t}^{-1} (x - phi_f(t) mu_k).
/// Throws DIMENSION_MISMATCH, NEGATIVE_TIME or SINGULAR_COVARIANCE.
Vector mixture_score(const GaussianMixture& mixture, const Schedule& schedule, double t,
                     std::span<const double> x);
double mixture_log_density(const GaussianMixture& mixture, const Schedule& schedule, double t,
                           std::span<const double> x);

}  // namespace dsb
