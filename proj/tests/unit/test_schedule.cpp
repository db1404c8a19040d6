#include <gtest/gtest.h>

#include <cmath>

#include "dsb/error.hpp"
#include "dsb/schedule.hpp"

namespace {

dsb::Schedule ou_schedule(double q = 1e-3) {
  return dsb::make_generic_schedule([](double) { return 1.0; }, [](double) { return std::sqrt(2.0); }, q);
}

dsb::Schedule vp_generic(double q = 1e-3) {
  return dsb::make_generic_schedule([](double t) { return t / 2; }, [](double t) { return std::sqrt(t); }, q);
}

}  // namespace

TEST(VpSchedule, InitialConditions) {
  const auto p = dsb::make_vp_schedule().marginal_params(0.0);
  EXPECT_EQ(p.mean_decay, 1.0);
  EXPECT_EQ(p.variance, 0.0);
}

TEST(VpSchedule, ClosedFormAtFour) {
  const auto p = dsb::make_vp_schedule().marginal_params(4.0);
  EXPECT_NEAR(p.mean_decay, std::exp(-4.0), 1e-15);
  EXPECT_NEAR(p.variance, 1.0 - std::exp(-8.0), 1e-15);
  EXPECT_NEAR(p.mean_decay, 0.018316, 1e-6);
  EXPECT_NEAR(p.variance, 0.999665, 1e-6);
}

TEST(VpSchedule, Diffusion) { EXPECT_NEAR(dsb::make_vp_schedule().diffusion(2.0), 1.414214, 1e-6); }

TEST(VpSchedule, IdentityMeanSquaredPlusVarianceIsOne) {
  const auto s = dsb::make_vp_schedule();
  for (double t = 0.0; t <= 10.0; t += 0.37) {
    const auto p = s.marginal_params(t);
    EXPECT_NEAR(p.mean_decay * p.mean_decay + p.variance, 1.0, 1e-15) << t;
  }
}

TEST(VpSchedule, VarianceSatisfiesOde) {
  const auto s = dsb::make_vp_schedule();
  const double e = 1e-5;
  for (double t : {0.3, 0.9, 1.7, 2.5, 3.3, 4.0}) {
    const double deriv = (s.variance(t + e) - s.variance(t - e)) / (2 * e);
    const double rhs = -2.0 * s.drift_rate(t) * s.variance(t) + s.diffusion(t) * s.diffusion(t);
    EXPECT_NEAR(deriv, rhs, 1e-6) << t;
  }
}

TEST(VpSchedule, NegativeTimeRejected) {
  try {
    (void)dsb::make_vp_schedule().marginal_params(-0.1);
    FAIL();
  } catch (const dsb::Error& e) {
    EXPECT_EQ(e.code(), dsb::ErrorCode::kNegativeTime);
  }
}

TEST(GenericSchedule, OrnsteinUhlenbeckClosedForm) {
  const auto p = ou_schedule().marginal_params(1.0);
  EXPECT_NEAR(p.mean_decay, std::exp(-1.0), 1e-8);
  EXPECT_NEAR(p.variance, 1.0 - std::exp(-2.0), 1e-8);
}

TEST(GenericSchedule, MatchesVpClosedForm) {
  const auto g = vp_generic().marginal_params(4.0);
  const auto v = dsb::make_vp_schedule().marginal_params(4.0);
  EXPECT_NEAR(g.mean_decay, v.mean_decay, 1e-8);
  EXPECT_NEAR(g.variance, v.variance, 1e-8);
}

TEST(GenericSchedule, ZeroTime) {
  const auto s = dsb::make_generic_schedule([](double) { return 0.5; }, [](double) { return 1.0; }, 1e-2);
  const auto p = s.marginal_params(0.0);
  EXPECT_EQ(p.mean_decay, 1.0);
  EXPECT_EQ(p.variance, 0.0);
}

TEST(GenericSchedule, OuApproachesStationaryLawMonotonically) {
  const auto s = ou_schedule(1e-2);
  double prev_decay = 1.0, prev_var = 0.0;
  for (double t = 0.5; t <= 20.0; t += 0.5) {
    const auto p = s.marginal_params(t);
    EXPECT_LT(p.mean_decay, prev_decay);
    // The variance reaches 1 to double precision near t = 18.
    if (t < 15.0) EXPECT_GT(p.variance, prev_var);
    EXPECT_GE(p.variance, prev_var);
    prev_decay = p.mean_decay;
    prev_var = p.variance;
  }
  EXPECT_NEAR(prev_decay, 0.0, 1e-8);
  EXPECT_NEAR(prev_var, 1.0, 1e-8);
}

TEST(GenericSchedule, NonPositiveStepRejected) {
  for (double q : {0.0, -1e-3}) {
    try {
      (void)ou_schedule(q);
      FAIL();
    } catch (const dsb::Error& e) {
      EXPECT_EQ(e.code(), dsb::ErrorCode::kNonPositiveStep);
    }
  }
}

TEST(GenericSchedule, MonotoneInTime) {
  const auto s = vp_generic(5e-3);
  double prev_decay = 1.0, prev_var = 0.0;
  for (double t = 0.05; t <= 6.0; t += 0.05) {
    const auto p = s.marginal_params(t);
    EXPECT_LE(p.mean_decay, prev_decay);
    EXPECT_GE(p.variance, prev_var);
    prev_decay = p.mean_decay;
    prev_var = p.variance;
  }
}

// Simpson error scales as q^4: halving the step shrinks the error about 16x.
TEST(GenericSchedule, FourthOrderQuadrature) {
  const auto f = [](double t) { return 0.3 + std::sin(t); };
  const auto g = [](double t) { return 1.0 + 0.5 * t * t; };
  const double t = 2.4;  // 12, 24 and 48 panels
  const double v1 = dsb::make_generic_schedule(f, g, 0.2).variance(t);
  const double v2 = dsb::make_generic_schedule(f, g, 0.1).variance(t);
  const double v4 = dsb::make_generic_schedule(f, g, 0.05).variance(t);
  const double ratio = (v1 - v2) / (v2 - v4);
  EXPECT_NEAR(ratio, 16.0, 1.5);
  const double richardson = (v2 - v4) / 15.0;
  const double fine = dsb::make_generic_schedule(f, g, 1e-3).variance(t);
  EXPECT_LT(std::abs(v4 + richardson - fine), 10.0 * std::abs(richardson));
}

TEST(PiecewisePolynomial, EvaluatesPieces) {
  dsb::PiecewisePolynomial p{{0.0, 1.0}, {{1.0, 2.0}, {0.0, 0.0, 3.0}}};
  p.validate();
  EXPECT_DOUBLE_EQ(p(0.5), 2.0);
  EXPECT_DOUBLE_EQ(p(2.0), 12.0);
  EXPECT_DOUBLE_EQ(p(-1.0), -1.0);
}

TEST(PiecewisePolynomial, RejectsBadTables) {
  dsb::PiecewisePolynomial unsorted{{1.0, 0.0}, {{1.0}, {1.0}}};
  dsb::PiecewisePolynomial sizes{{0.0}, {{1.0}, {2.0}}};
  for (const auto* p : {&unsorted, &sizes}) {
    try {
      p->validate();
      FAIL();
    } catch (const dsb::Error& e) {
      EXPECT_EQ(e.code(), dsb::ErrorCode::kBadConfig);
    }
  }
}
