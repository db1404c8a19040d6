#include "dsb/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dsb/error.hpp"
#include "dsb/mixture.hpp"
#include "dsb/parallel.hpp"
#include "dsb/sampler.hpp"

namespace dsb {

namespace {

constexpr double kEigenClampRelative = 1e-8;

void clamp_or_throw(Vector& values, const char* what) {
  double spectral = 0.0;
  for (double v : values) spectral = std::max(spectral, std::abs(v));
  for (double& v : values) {
    if (v < -kEigenClampRelative * spectral)
      throw Error(ErrorCode::kNegativeEigenvalue, std::string(what) + ": eigenvalue " + std::to_string(v));
    v = std::max(v, 0.0);
  }
}

void check_symmetric(const Matrix& s) {
  if (!s.square()) throw Error(ErrorCode::kNotSymmetric, "matrix is not square");
  if (s.asymmetry() > 1e-10 * std::max(1.0, s.frobenius_norm()))
    throw Error(ErrorCode::kNotSymmetric, "matrix is not symmetric");
}

}  // namespace

std::string_view to_string(MomentMode mode) noexcept { return mode == MomentMode::kDiag ? "diag" : "full"; }

MomentMode parse_moment_mode(std::string_view name) {
  if (name == "diag") return MomentMode::kDiag;
  if (name == "full") return MomentMode::kFull;
  throw Error(ErrorCode::kInvalidArgument, "unknown metric mode '" + std::string(name) + "'");
}

MomentAccumulator::MomentAccumulator(std::size_t dim, MomentMode mode)
    : dim_(dim), mode_(mode), mean_(dim, 0.0), m2_(mode == MomentMode::kDiag ? dim : dim * dim, 0.0), delta_(dim) {}

void MomentAccumulator::add(std::span<const double> x) {
  ++n_;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < dim_; ++i) {
    delta_[i] = x[i] - mean_[i];
    mean_[i] += delta_[i] * inv_n;
  }
  if (mode_ == MomentMode::kDiag) {
    for (std::size_t i = 0; i < dim_; ++i) m2_[i] += delta_[i] * (x[i] - mean_[i]);
  } else {
    for (std::size_t i = 0; i < dim_; ++i) {
      const double after = x[i] - mean_[i];
      double* row = m2_.data() + i * dim_;
      for (std::size_t j = 0; j < dim_; ++j) row[j] += after * delta_[j];
    }
  }
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double total = na + nb;
  for (std::size_t i = 0; i < dim_; ++i) delta_[i] = other.mean_[i] - mean_[i];
  const double factor = na * nb / total;
  if (mode_ == MomentMode::kDiag) {
    for (std::size_t i = 0; i < dim_; ++i) m2_[i] += other.m2_[i] + delta_[i] * delta_[i] * factor;
  } else {
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        m2_[i * dim_ + j] += other.m2_[i * dim_ + j] + delta_[i] * delta_[j] * factor;
  }
  for (std::size_t i = 0; i < dim_; ++i) mean_[i] += delta_[i] * nb / total;
  n_ += other.n_;
}

MomentSummary MomentAccumulator::summary() const {
  if (n_ < 2) throw Error(ErrorCode::kTooFewSamples, "need at least two samples for a covariance");
  MomentSummary s;
  s.mode = mode_;
  s.mean = mean_;
  s.n = n_;
  const double inv = 1.0 / static_cast<double>(n_ - 1);
  if (mode_ == MomentMode::kDiag) {
    s.variance.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) s.variance[i] = std::max(0.0, m2_[i] * inv);
  } else {
    s.covariance = Matrix(dim_, dim_);
    // Symmetrize: the one-pass update accumulates (x - new mean)(x - old mean)^T.
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        s.covariance(i, j) = 0.5 * (m2_[i * dim_ + j] + m2_[j * dim_ + i]) * inv;
  }
  return s;
}

MomentSummary accumulate_moments(const SampleBatch& batch, MomentMode mode, std::size_t workers) {
  if (batch.n < 2) throw Error(ErrorCode::kTooFewSamples, "need at least two samples for a covariance");
  std::vector<MomentAccumulator> parts(chunk_count(batch.n), MomentAccumulator(batch.d, mode));
  for_each_chunk(batch.n, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) parts[c].add(batch.row(i));
  });
  MomentAccumulator total(batch.d, mode);
  for (const auto& p : parts) total.merge(p);
  return total.summary();
}

MomentSummary analytic_moments(const GaussianMixture& mixture, MomentMode mode) {
  MomentSummary s;
  s.mode = mode;
  s.mean = mixture.mean();
  s.n = 0;
  if (mode == MomentMode::kDiag) {
    s.variance = mixture.variance_diagonal();
  } else {
    s.covariance = mixture.covariance();
  }
  return s;
}

Matrix sym_psd_sqrt(const Matrix& s) {
  check_symmetric(s);
  const std::size_t n = s.rows();
  auto eig = jacobi_eigen(s);
  clamp_or_throw(eig.values, "sym_psd_sqrt");
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::sqrt(eig.values[k]);
    if (r == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = r * eig.vectors(i, k);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
    }
  }
  return out;
}

double gaussian_w2(const MomentSummary& a, const MomentSummary& b) {
  if (a.mode != b.mode) throw Error(ErrorCode::kModeMismatch, "summaries use different moment modes");
  if (a.dim() != b.dim()) throw Error(ErrorCode::kDimensionMismatch, "summaries have different dimensions");
  double mean_term = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double dm = a.mean[i] - b.mean[i];
    mean_term += dm * dm;
  }
  if (a.mode == MomentMode::kDiag) {
    double cov_term = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
      const double ds = std::sqrt(a.variance[i]) - std::sqrt(b.variance[i]);
      cov_term += ds * ds;
    }
    return std::sqrt(mean_term + cov_term);
  }

  const Matrix root_a = sym_psd_sqrt(a.covariance);
  Matrix inner = root_a * b.covariance * root_a;
  for (std::size_t i = 0; i < inner.rows(); ++i)
    for (std::size_t j = i + 1; j < inner.cols(); ++j) {
      const double avg = 0.5 * (inner(i, j) + inner(j, i));
      inner(i, j) = avg;
      inner(j, i) = avg;
    }
  auto eig = jacobi_eigen(inner);
  clamp_or_throw(eig.values, "gaussian_w2");
  double cross = 0.0;
  for (double v : eig.values) cross += std::sqrt(v);
  const double squared = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
  return std::sqrt(std::max(0.0, squared));
}

SlopeFit fit_log_slope(std::span<const SlopePoint> points) {
  if (points.size() < 2) throw Error(ErrorCode::kDegenerateFit, "need at least two points");
  std::vector<double> xs, ys;
  xs.reserve(points.size());
  ys.reserve(points.size());
  for (const auto& p : points) {
    if (!(p.abscissa > 0.0) || !(p.value > 0.0) || !std::isfinite(p.abscissa) || !std::isfinite(p.value))
      throw Error(ErrorCode::kInvalidArgument, "log-slope fit needs positive finite points");
    xs.push_back(std::log(p.abscissa));
    ys.push_back(std::log(p.value));
  }
  const double count = static_cast<double>(xs.size());
  double x_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= count;
  y_mean /= count;
  // Centered normal equations of the [1, log h] least-squares system.
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
    sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::kDegenerateFit, "abscissae are all identical");
  SlopeFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = y_mean - fit.exponent * x_mean;
  fit.points = xs.size();
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.exponent * xs[i]);
    rss += r * r;
  }
  fit.residual_norm = std::sqrt(rss);
  return fit;
}

}  // namespace dsb
