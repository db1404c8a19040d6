#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dsb/error.hpp"
#include "dsb/linalg.hpp"
#include "dsb/metrics.hpp"
#include "dsb/sampler.hpp"

namespace {

using dsb::Matrix;
using dsb::MomentMode;
using dsb::MomentSummary;
using dsb::Vector;

MomentSummary diag_summary(Vector mean, Vector var) { return {MomentMode::kDiag, std::move(mean), std::move(var), {}, 0}; }
MomentSummary full_summary(Vector mean, Matrix cov) { return {MomentMode::kFull, std::move(mean), {}, std::move(cov), 0}; }

Matrix random_spd(std::mt19937_64& gen, std::size_t d, double ridge = 0.1) {
  std::normal_distribution<double> z;
  Matrix a(d, d);
  for (auto& v : a.data()) v = z(gen);
  Matrix s = a.transposed() * a;
  for (std::size_t i = 0; i < d; ++i) s(i, i) += ridge;
  return s;
}

dsb::SampleBatch batch_of(std::size_t d, std::vector<double> data) {
  dsb::SampleBatch b;
  b.d = d;
  b.n = data.size() / d;
  b.data = std::move(data);
  return b;
}

template <class Fn>
dsb::ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const dsb::Error& e) {
    return e.code();
  }
  return dsb::ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Moments, ConstantBatch) {
  const auto m = dsb::accumulate_moments(batch_of(2, {3.0, -1.0, 3.0, -1.0, 3.0, -1.0}), MomentMode::kFull);
  EXPECT_EQ(m.mean, (Vector{3.0, -1.0}));
  EXPECT_EQ(m.covariance.frobenius_norm(), 0.0);
}

TEST(Moments, TwoPoints) {
  const auto m = dsb::accumulate_moments(batch_of(1, {-1.0, 1.0}), MomentMode::kDiag);
  EXPECT_EQ(m.mean[0], 0.0);
  EXPECT_DOUBLE_EQ(m.variance[0], 2.0);
  EXPECT_EQ(m.n, 2u);
}

TEST(Moments, TooFewSamples) {
  EXPECT_EQ(code_of([] { (void)dsb::accumulate_moments(batch_of(2, {1.0, 2.0}), MomentMode::kDiag); }),
            dsb::ErrorCode::kTooFewSamples);
}

TEST(Moments, StandardNormalDraws) {
  const std::size_t d = 8, n = 1000000;
  const dsb::CounterRng rng(2);
  dsb::MomentAccumulator acc(d, MomentMode::kDiag);
  Vector x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; c += 2) {
      const auto z = rng.normal_pair(i, 0, static_cast<std::uint32_t>(c), dsb::Substream::kData);
      x[c] = z[0];
      x[c + 1] = z[1];
    }
    acc.add(x);
  }
  const auto s = acc.summary();
  for (std::size_t c = 0; c < d; ++c) {
    EXPECT_NEAR(s.mean[c], 0.0, 4.0 / std::sqrt(double(n)));
    EXPECT_NEAR(s.variance[c], 1.0, 4.0 * std::sqrt(2.0 / double(n)));
  }
}

TEST(Moments, MergeEqualsSequential) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> z;
  dsb::MomentAccumulator all(3, MomentMode::kFull), a(3, MomentMode::kFull), b(3, MomentMode::kFull);
  for (int i = 0; i < 500; ++i) {
    const Vector x{z(gen), 2.0 * z(gen) + 1.0, z(gen) - 3.0};
    all.add(x);
    (i < 173 ? a : b).add(x);
  }
  a.merge(b);
  const auto s1 = all.summary(), s2 = a.summary();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(s1.mean[i], s2.mean[i], 1e-13);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(s1.covariance(i, k), s2.covariance(i, k), 1e-12);
  }
}

TEST(Moments, ParallelAccumulationIsDeterministic) {
  std::vector<double> data(5000 * 3);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z;
  for (auto& v : data) v = z(gen);
  const auto batch = batch_of(3, data);
  const auto a = dsb::accumulate_moments(batch, MomentMode::kFull, 1);
  const auto b = dsb::accumulate_moments(batch, MomentMode::kFull, 4);
  EXPECT_EQ(a.mean, b.mean);
  const auto ca = a.covariance.data(), cb = b.covariance.data();
  EXPECT_TRUE(std::equal(ca.begin(), ca.end(), cb.begin(), cb.end()));
}

TEST(GaussianW2, IdenticalIsZero) {
  std::mt19937_64 gen(3);
  const auto s = full_summary({1.0, 2.0, 3.0, 4.0}, random_spd(gen, 4));
  EXPECT_NEAR(dsb::gaussian_w2(s, s), 0.0, 1e-7);
  const auto d = diag_summary({1.0, -1.0}, {0.5, 2.0});
  EXPECT_EQ(dsb::gaussian_w2(d, d), 0.0);
}

TEST(GaussianW2, OneDimensionalClosedForm) {
  const double expected = std::sqrt(2.0);
  EXPECT_NEAR(dsb::gaussian_w2(diag_summary({0.0}, {1.0}), diag_summary({1.0}, {4.0})), expected, 1e-12);
  EXPECT_NEAR(dsb::gaussian_w2(full_summary({0.0}, Matrix::diagonal(Vector{1.0})), full_summary({1.0}, Matrix::diagonal(Vector{4.0}))),
              expected, 1e-12);
}

TEST(GaussianW2, FullEqualsDiagOnDiagonalInputs) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.05, 3.0), m(-2.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    Vector ma(6), mb(6), va(6), vb(6);
    for (std::size_t i = 0; i < 6; ++i) {
      ma[i] = m(gen), mb[i] = m(gen), va[i] = u(gen), vb[i] = u(gen);
    }
    const double diag = dsb::gaussian_w2(diag_summary(ma, va), diag_summary(mb, vb));
    const double full = dsb::gaussian_w2(full_summary(ma, Matrix::diagonal(va)), full_summary(mb, Matrix::diagonal(vb)));
    EXPECT_NEAR(full, diag, 1e-8);
  }
}

TEST(GaussianW2, SymmetryAndTriangleInequality) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  const std::size_t d = 4;
  auto random_summary = [&] {
    Vector mu(d);
    for (auto& v : mu) v = z(gen);
    return full_summary(mu, random_spd(gen, d, 0.05));
  };
  for (int rep = 0; rep < 100; ++rep) {
    const auto a = random_summary(), b = random_summary(), c = random_summary();
    const double ab = dsb::gaussian_w2(a, b), ba = dsb::gaussian_w2(b, a);
    EXPECT_NEAR(ab, ba, 1e-9 * std::max(1.0, ab));
    EXPECT_LE(ab, dsb::gaussian_w2(a, c) + dsb::gaussian_w2(c, b) + 1e-9);
  }
}

TEST(GaussianW2, Errors) {
  const auto a = diag_summary({0.0}, {1.0});
  EXPECT_EQ(code_of([&] { (void)dsb::gaussian_w2(a, full_summary({0.0}, Matrix::diagonal(Vector{1.0}))); }),
            dsb::ErrorCode::kModeMismatch);
  EXPECT_EQ(code_of([&] { (void)dsb::gaussian_w2(a, diag_summary({0.0, 1.0}, {1.0, 1.0})); }),
            dsb::ErrorCode::kDimensionMismatch);
}

TEST(SymPsdSqrt, Examples) {
  const Matrix id = dsb::sym_psd_sqrt(Matrix::identity(3));
  EXPECT_LT((id - Matrix::identity(3)).frobenius_norm(), 1e-14);
  const Matrix r = dsb::sym_psd_sqrt(Matrix::diagonal(Vector{4.0, 9.0}));
  EXPECT_NEAR(r(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(r(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-14);
}

TEST(SymPsdSqrt, SelfConsistencyD16) {
  std::mt19937_64 gen(16);
  std::normal_distribution<double> z;
  Matrix a(16, 16);
  for (auto& v : a.data()) v = z(gen);
  const Matrix s = a.transposed() * a;
  const Matrix r = dsb::sym_psd_sqrt(s);
  EXPECT_LT((r * r - s).frobenius_norm() / s.frobenius_norm(), 1e-9);
}

TEST(SymPsdSqrt, ClampsTinyNegativesAndRejectsLargeOnes) {
  Matrix s = Matrix::diagonal(Vector{1.0, -1e-12});
  EXPECT_NEAR(dsb::sym_psd_sqrt(s)(1, 1), 0.0, 1e-15);
  EXPECT_EQ(code_of([] { (void)dsb::sym_psd_sqrt(Matrix::diagonal(Vector{1.0, -0.1})); }),
            dsb::ErrorCode::kNegativeEigenvalue);
  Matrix asym = Matrix::identity(2);
  asym(0, 1) = 0.3;
  EXPECT_EQ(code_of([&] { (void)dsb::sym_psd_sqrt(asym); }), dsb::ErrorCode::kNotSymmetric);
}

TEST(JacobiEigen, Reconstructs) {
  std::mt19937_64 gen(21);
  const Matrix s = random_spd(gen, 7);
  const auto eig = dsb::jacobi_eigen(s);
  Matrix rec(7, 7);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t k = 0; k < 7; ++k)
      for (std::size_t j = 0; j < 7; ++j) rec(i, k) += eig.vectors(i, j) * eig.values[j] * eig.vectors(k, j);
  EXPECT_LT((rec - s).frobenius_norm(), 1e-10 * s.frobenius_norm());
}

TEST(FitLogSlope, ExactPowerLaws) {
  std::vector<dsb::SlopePoint> linear, three_halves;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    linear.push_back({h, 3.0 * h});
    three_halves.push_back({h, std::pow(h, 1.5)});
  }
  const auto a = dsb::fit_log_slope(linear);
  EXPECT_NEAR(a.exponent, 1.0, 1e-12);
  EXPECT_NEAR(a.intercept, std::log(3.0), 1e-12);
  EXPECT_EQ(a.points, 4u);
  EXPECT_NEAR(a.residual_norm, 0.0, 1e-12);
  EXPECT_NEAR(dsb::fit_log_slope(three_halves).exponent, 1.5, 1e-12);
}

TEST(FitLogSlope, ScaleInvariance) {
  std::vector<dsb::SlopePoint> p{{0.3, 0.7}, {0.1, 0.2}, {0.05, 0.13}, {0.01, 0.02}};
  auto scaled = p;
  for (auto& q : scaled) q.value *= 5.0;
  const auto a = dsb::fit_log_slope(p), b = dsb::fit_log_slope(scaled);
  EXPECT_NEAR(a.exponent, b.exponent, 1e-12);
  EXPECT_NEAR(b.intercept - a.intercept, std::log(5.0), 1e-12);
}

// Figure 1 (top left) tabulated GMM/EM data, restricted to the stable region.
TEST(FitLogSlope, PublishedGmmSweep) {
  const std::vector<dsb::SlopePoint> table{
      {2, 84.4626879211461},    {0.8, 9.59465224155552},  {0.666666666666667, 7.71286668259183},
      {0.571428571428572, 6.50065147605524}, {0.5, 5.63300259998227}, {0.4, 4.4602470258662},
      {0.2666666666666667, 2.94893360875306}, {0.16, 1.77048073547816}, {0.08, 0.899954294174925},
      {0.04, 0.470831919060095}, {0.02, 0.284302607709736}, {0.01, 0.211296139804571},
      {0.005, 0.185378946874542}};
  std::vector<dsb::SlopePoint> window;
  for (const auto& p : table)
    if (p.abscissa >= 0.036 && p.abscissa <= 1.0 && p.value >= 0.3) window.push_back(p);
  EXPECT_EQ(window.size(), 9u);
  EXPECT_NEAR(dsb::fit_log_slope(window).exponent, 1.00, 0.005);
}

TEST(FitLogSlope, Degenerate) {
  EXPECT_EQ(code_of([] {
              std::vector<dsb::SlopePoint> one{{0.1, 1.0}};
              (void)dsb::fit_log_slope(one);
            }),
            dsb::ErrorCode::kDegenerateFit);
  EXPECT_EQ(code_of([] {
              std::vector<dsb::SlopePoint> same{{0.1, 1.0}, {0.1, 2.0}};
              (void)dsb::fit_log_slope(same);
            }),
            dsb::ErrorCode::kDegenerateFit);
  EXPECT_EQ(code_of([] {
              std::vector<dsb::SlopePoint> neg{{0.1, 1.0}, {0.2, -2.0}};
              (void)dsb::fit_log_slope(neg);
            }),
            dsb::ErrorCode::kInvalidArgument);
}

TEST(AnalyticMoments, Mixture) {
  const dsb::GaussianMixture mix({0.5, 0.5}, {{-1.0, 0.0}, {1.0, 0.0}},
                                 {dsb::Covariance::diag({1.0, 2.0}), dsb::Covariance::diag({1.0, 2.0})});
  const auto d = dsb::analytic_moments(mix, MomentMode::kDiag);
  EXPECT_EQ(d.n, 0u);
  EXPECT_NEAR(d.variance[0], 2.0, 1e-15);
  EXPECT_NEAR(d.variance[1], 2.0, 1e-15);
  const auto f = dsb::analytic_moments(mix, MomentMode::kFull);
  EXPECT_NEAR(f.covariance(0, 1), 0.0, 1e-15);
}
