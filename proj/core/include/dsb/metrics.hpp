#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dsb/linalg.hpp"

namespace dsb {

class GaussianMixture;
struct SampleBatch;

enum class MomentMode { kDiag, kFull };

std::string_view to_string(MomentMode mode) noexcept;
/// diag|full; throws INVALID_ARGUMENT otherwise.
MomentMode parse_moment_mode(std::string_view name);

/// Gaussian moment summary of a sample set (or of an analytic law, n = 0).
struct MomentSummary {
  MomentMode mode = MomentMode::kDiag;
  Vector mean;
  Vector variance;    // kDiag
  Matrix covariance;  // kFull
  std::size_t n = 0;

  std::size_t dim() const noexcept { return mean.size(); }
};

/// Streaming mean/covariance (Welford), mergeable with Chan's update.
class MomentAccumulator {
 public:
  MomentAccumulator(std::size_t dim, MomentMode mode);

  void add(std::span<const double> x);
  void merge(const MomentAccumulator& other);
  std::size_t count() const noexcept { return n_; }

  /// Unbiased (n - 1) covariance. Throws TOO_FEW_SAMPLES for n < 2.
  MomentSummary summary() const;

 private:
  std::size_t dim_;
  MomentMode mode_;
  std::size_t n_ = 0;
  Vector mean_;
  Vector m2_;  // d entries (diag) or d*d (full)
  Vector delta_;
};

/// Throws TOO_FEW_SAMPLES for n < 2.
MomentSummary accumulate_moments(const SampleBatch& batch, MomentMode mode, std::size_t workers = 1);

/// Exact mean and covariance of a mixture (n = 0 marks an analytic summary).
MomentSummary analytic_moments(const GaussianMixture& mixture, MomentMode mode);

/// 2-Wasserstein distance between the Gaussians described by two summaries.
///   diag: sqrt(|mu_a - mu_b|^2 + sum_i (sqrt(v_a,i) - sqrt(v_b,i))^2)
///   full: sqrt(|mu_a - mu_b|^2 + tr A + tr B - 2 tr (A^{1/2} B A^{1/2})^{1/2})
/// Throws MODE_MISMATCH, DIMENSION_MISMATCH or NEGATIVE_EIGENVALUE.
double gaussian_w2(const MomentSummary& a, const MomentSummary& b);

/// Principal square root V diag(sqrt(max(lambda, 0))) V^T via cyclic Jacobi.
/// Eigenvalues below -1e-8 times the spectral norm throw NEGATIVE_EIGENVALUE;
/// smaller negative ones are clamped. Throws NOT_SYMMETRIC.
Matrix sym_psd_sqrt(const Matrix& s);

struct SlopePoint {
  double abscissa;
  double value;
};

struct SlopeFit {
  double intercept = 0.0;  // b_LS
  double exponent = 0.0;   // omega_LS
  std::size_t points = 0;
  double residual_norm = 0.0;
};

/// Least-squares fit of log value = b + omega log abscissa. Throws
/// DEGENERATE_FIT with fewer than two distinct abscissae and
/// INVALID_ARGUMENT on non-positive entries.
SlopeFit fit_log_slope(std::span<const SlopePoint> points);

}  // namespace dsb
