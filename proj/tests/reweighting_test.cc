#include "rla/reweighting.h"

#include <gtest/gtest.h>

#include <cmath>

#include "instances.h"
#include "oracles.h"
#include "rla/rng.h"

namespace rla {
namespace {

long double EpsRef(long double p, long double d, long double D) { return (1 - p) * d + p * D; }
long double TauRef(long double p, long double d, long double D) { return 1 / ((1 - p) / (1 + d) + p / (1 + D)) - 1; }
long double GammaRef(long double p, long double d, long double D) { return d / (2 + d) + (1 + d) * p * D / (1 + d * p); }
long double MarginRef(long double mu, long double p, long double d, long double D) {
  const long double e = EpsRef(p, d, D), t = TauRef(p, d, D);
  return std::min(mu / (1 + e), mu * (1 + t) - t) - 4 * GammaRef(p, d, D);
}

TEST(DistortionTest, Collapses) {
  for (double d : {0.0, 0.001, 0.05}) {
    for (double D : {0.05, 0.1, 0.25}) {
      EXPECT_DOUBLE_EQ(epsilon(0, d, D), d);
      EXPECT_DOUBLE_EQ(epsilon(1, d, D), D);
      EXPECT_NEAR(tau(0, d, D), d, 1e-15);
      EXPECT_NEAR(tau(1, d, D), D, 1e-15);
      EXPECT_NEAR(gamma_tv(0, d, D), d / (2 + d), 1e-15);
      EXPECT_NEAR(eta_dup(1, d, D), (1 + D) * (1 + D) - 1, 1e-15);
    }
  }
  EXPECT_NEAR(gamma_tv(0.3, 0, 0.1), 0.03, 1e-15);
  EXPECT_NEAR(eta_dup(0, 0, 0.1), 0.1, 1e-15);
}

TEST(DistortionTest, Examples) {
  EXPECT_NEAR(epsilon(0.1, 0.01, 0.1), 0.019, 1e-15);
  EXPECT_NEAR(tau(0.5, 0, 0.1), 0.0476190476190476, 1e-12);
  EXPECT_NEAR(gamma_tv(0.05, 0.01, 0.1), 0.01 / 2.01 + 1.01 * 0.005 / 1.0005, 1e-15);
  EXPECT_NEAR(gamma_tv(0.05, 0.01, 0.1), 0.010022, 1e-6);
  EXPECT_NEAR(eta_dup(0.1, 0.01, 0.1), 0.1209, 1e-12);
  EXPECT_DOUBLE_EQ(retained_margin(0.02, 0, 0, 0.1), 0.02);
  EXPECT_LT(retained_margin(0.02, 1, 0.01, 0.1), 0.0);
}

TEST(DistortionTest, AgreesWithLongDoubleAndOrderings) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double D = rng.uniform() * 0.25, d = rng.uniform() * D, p = rng.uniform(), mu = 0.001 + rng.uniform();
    EXPECT_NEAR(epsilon(p, d, D), EpsRef(p, d, D), 1e-12);
    EXPECT_NEAR(tau(p, d, D), TauRef(p, d, D), 1e-12);
    EXPECT_NEAR(gamma_tv(p, d, D), GammaRef(p, d, D), 1e-12);
    EXPECT_NEAR(retained_margin(std::min(mu, 1.0), p, d, D), MarginRef(std::min(mu, 1.0), p, d, D), 1e-12);
    EXPECT_LE(tau(p, d, D), epsilon(p, d, D) + 1e-15);
    EXPECT_LE(eta_dup(p, d, D), (1 + D) * (1 + D) - 1 + 1e-15);
  }
}

TEST(RetainedMarginTest, NonincreasingInP) {
  for (double mu : {0.005, 0.02, 0.1}) {
    double prev = retained_margin(mu, 0, 0.001, 0.1);
    for (int i = 1; i <= 1000; ++i) {
      const double cur = retained_margin(mu, i / 1000.0, 0.001, 0.1);
      EXPECT_LE(cur, prev + 1e-15);
      prev = cur;
    }
  }
}

TEST(WithinFactorTest, InclusiveEndpoints) {
  EXPECT_TRUE(within_factor(1001, 1000, 0.001));
  EXPECT_TRUE(within_factor(1000, 1001, 0.001));
  EXPECT_FALSE(within_factor(1002, 1000, 0.001));
  EXPECT_TRUE(within_factor(1100, 1000, 0.1));
  EXPECT_FALSE(within_factor(1101, 1000, 0.1));
  EXPECT_TRUE(within_factor(0, 0, 0.0));
}

TEST(Delta0Test, SquaresBack) {
  for (double D : {0.0, 0.01, 0.1, 0.25}) EXPECT_NEAR(std::pow(1 + delta0_from(D), 2), 1 + D, 1e-15);
}

TEST(PsiTest, NoDistortion) {
  const PsiResult r = psi(0.02, 0.25, 0.025, 0, 0);
  EXPECT_EQ(r.p_star, 1.0);
  EXPECT_EQ(r.k_tv, static_cast<std::int64_t>(std::ceil(std::log(1 / 0.025))));
}

TEST(PsiTest, MatchesDenseGridScan) {
  const double mu = 0.02, rho = 0.25, d = 0.001, D = 0.1;
  const PsiResult r = psi(mu, rho, 0.025, D, d);
  // Walk a 1e-7 grid from 0 until the retained margin drops below target.
  const long double target = (1 - rho) * mu;
  long double last_ok = 0;
  for (long double p = 0; p <= 1; p += 1e-7L) {
    if (MarginRef(mu, p, d, D) < target) break;
    last_ok = p;
  }
  EXPECT_NEAR(r.p_star, static_cast<double>(last_ok), 1e-6);
  EXPECT_GT(r.p_star, 0.0);
  EXPECT_EQ(r.k_tv, static_cast<std::int64_t>(std::ceil(std::log(1 / 0.025) / r.p_star)));
  EXPECT_GE(retained_margin(mu, r.p_star, d, D), target - 1e-15);
}

TEST(PsiTest, InfeasibleBudget) {
  // 4 Gamma_tv(0) = 4 delta/(2+delta) ~ 0.02 already exceeds the allowance.
  const PsiResult r = psi(0.02, 0.25, 0.025, 0.1, 0.01);
  EXPECT_EQ(r.p_star, 0.0);
  EXPECT_FALSE(r.feasible());
  EXPECT_EQ(r.k_tv, 0);
}

TEST(PsiTest, OverrideTradesDraws) {
  const PsiResult full = psi(0.02, 0.25, 0.025, 0.1, 0.001);
  const PsiResult half = psi(0.02, 0.25, 0.025, 0.1, 0.001, full.p_star / 2);
  EXPECT_DOUBLE_EQ(half.p_star, full.p_star / 2);
  EXPECT_GT(half.k_tv, full.k_tv);
  EXPECT_THROW(psi(0.02, 0.25, 0.025, 0.1, 0.001, full.p_star * 1.5), std::invalid_argument);
  EXPECT_THROW(psi(0.02, 0.25, 0.025, 0.1, 0.001, 0.0), std::invalid_argument);
}

TEST(PsiTest, RejectsBadInputs) {
  EXPECT_THROW(psi(0.0, 0.25, 0.025, 0.1, 0.001), std::invalid_argument);
  EXPECT_THROW(psi(0.02, 1.0, 0.025, 0.1, 0.001), std::invalid_argument);
  EXPECT_THROW(psi(0.02, 0.25, 0.025, 0.1, 0.2), std::invalid_argument);
}

TEST(CertificateTest, Fields) {
  const PsiResult r{0.004, 922};
  const ManifestCertificate c = make_certificate(r, 0.001, 0.1, 1000000);
  EXPECT_DOUBLE_EQ(c.epsilon, epsilon(0.004, 0.001, 0.1));
  EXPECT_EQ(c.n_upper, static_cast<std::int64_t>(std::ceil((1 + c.epsilon) * 1000000)));
  EXPECT_GE(c.n_upper, 1000000);
  EXPECT_EQ(c.k_tv, 922);
}

TEST(TvDistanceTest, Examples) {
  const DiscreteDistribution a({0.5, 0.5});
  EXPECT_DOUBLE_EQ(tv_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(DiscreteDistribution({1, 0}), DiscreteDistribution({0, 1})), 1.0);
  EXPECT_NEAR(tv_distance(a, DiscreteDistribution({0.6, 0.4})), 0.1, 1e-15);
  EXPECT_THROW(tv_distance(a, DiscreteDistribution({1.0})), std::invalid_argument);
  EXPECT_THROW(DiscreteDistribution({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(DiscreteDistribution({1.5, -0.5}), std::invalid_argument);
  EXPECT_DOUBLE_EQ(DiscreteDistribution::from_counts({1, 3})[1], 0.75);
}

TEST(CertifyTest, Examples) {
  ReweightingCertificate c = certify_reweighting({10, 20}, {10, 20}, 0.01, 0.1);
  EXPECT_TRUE(c.bad.empty());
  EXPECT_EQ(c.p, 0.0);
  EXPECT_TRUE(c.within_Delta);

  c = certify_reweighting({1001, 500}, {1000, 500}, 0.001, 0.1);
  EXPECT_TRUE(c.bad.empty());

  c = certify_reweighting({1100, 500}, {1000, 500}, 0.001, 0.1);
  EXPECT_EQ(c.bad, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(c.p, 1000.0 / 1500.0);
  EXPECT_TRUE(c.within_Delta);

  c = certify_reweighting({1101, 500}, {1000, 500}, 0.001, 0.1);
  EXPECT_FALSE(c.within_Delta);

  EXPECT_THROW(certify_reweighting({1}, {0}, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(certify_reweighting({1, 2}, {1}, 0.0, 0.1), std::invalid_argument);
}

// Random batchwise instances: exact total variation and aggregate size ratio
// stay inside the bounds for the certified bad mass.
TEST(CertifyTest, BatchwiseBoundsHold) {
  Rng rng(5);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const instances::Batchwise b = instances::RandomBatchwise(rng);
    const ReweightingCertificate c = certify_reweighting(b.actual, b.tab, b.delta, b.Delta);
    if (!c.within_Delta) continue;
    ++checked;
    long double M = 0, N = 0;
    for (std::size_t j = 0; j < b.tab.size(); ++j) {
      M += b.tab[j];
      N += b.actual[j];
    }
    std::vector<long double> rt, ra;
    for (std::size_t j = 0; j < b.tab.size(); ++j) {
      rt.push_back(b.tab[j] / M);
      ra.push_back(b.actual[j] / N);
    }
    EXPECT_LE(oracle::tv(rt, ra), gamma_tv(c.p, b.delta, b.Delta) + 1e-12);
    EXPECT_GE(M / N, 1 / (1 + epsilon(c.p, b.delta, b.Delta)) - 1e-12);
    EXPECT_LE(M / N, 1 + tau(c.p, b.delta, b.Delta) + 1e-12);
  }
  EXPECT_GT(checked, 1500);
}

// For weights bounded in [1/(1+eta), 1+eta], TV <= eta/(2+eta), and bounded
// functions differ in mean by at most 2 max|f| TV.
TEST(TvDistanceTest, BoundedReweightingAndBoundedFunctions) {
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    const int k = 2 + static_cast<int>(rng.below(30));
    const double eta = rng.uniform() * 0.5;
    std::vector<double> base(k), tilted(k), f(k);
    double sb = 0, st = 0;
    for (int j = 0; j < k; ++j) {
      base[j] = 0.01 + rng.uniform();
      sb += base[j];
    }
    for (int j = 0; j < k; ++j) {
      base[j] /= sb;
      tilted[j] = base[j] * std::exp((2 * rng.uniform() - 1) * std::log1p(eta));
      st += tilted[j];
      f[j] = 2 * rng.uniform() - 1;
    }
    for (double& t : tilted) t /= st;
    const DiscreteDistribution P = DiscreteDistribution::from_masses(base), Q = DiscreteDistribution::from_masses(tilted);
    const double d = tv_distance(P, Q);
    EXPECT_LE(d, eta / (2 + eta) + 1e-12);
    double ep = 0, eq = 0, fmax = 0;
    for (int j = 0; j < k; ++j) {
      ep += P[j] * f[j];
      eq += Q[j] * f[j];
      fmax = std::max(fmax, std::fabs(f[j]));
    }
    EXPECT_LE(std::fabs(ep - eq), 2 * fmax * d + 1e-12);
  }
}

}  // namespace
}  // namespace rla
