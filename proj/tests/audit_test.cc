#include "rla/audit.h"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>

#include "instances.h"
#include "rla/attacks.h"
#include "rla/dup_detect.h"
#include "rla/efficiency.h"

namespace rla {
namespace {

Election Honest(std::int64_t population, double margin, std::uint64_t seed = 1) {
  SimulationConfig c;
  c.population = population;
  c.margin = margin;
  c.rates = DiscrepancyRates::zero();
  c.batch_size = 500;
  Rng rng(seed);
  return generate_election(c, rng);
}

TEST(AuditParamsTest, DerivedValues) {
  AuditParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.alpha_sample(), 0.025);
  EXPECT_DOUBLE_EQ(p.mu_sample(0.02), 0.01);
  EXPECT_DOUBLE_EQ(p.kappa_dup(0.02), 0.0025);
  EXPECT_NEAR(p.Delta0(), std::sqrt(1.1) - 1, 1e-15);
  p.rho_tv = 0.8;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = AuditParams{};
  p.alpha_tv = 0.03;
  p.alpha_dup = 0.03;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_NO_THROW(AuditParams::without_certification(0.05).validate());
}

TEST(CheckManifestTest, Boundaries) {
  // Delta = 0.21 gives Delta0 = 0.1.
  const double d0 = delta0_from(0.21);
  EXPECT_NEAR(d0, 0.1, 1e-15);
  const Manifest coarse{{100, 100}, ManifestRole::kCoarse};
  EXPECT_EQ(check_manifest(coarse, Manifest{{100, 100}}, d0), StageResult::kNoError);
  EXPECT_EQ(check_manifest(coarse, Manifest{{110, 100}}, d0), StageResult::kNoError);
  EXPECT_EQ(check_manifest(coarse, Manifest{{111, 100}}, d0), StageResult::kError);
  EXPECT_EQ(check_manifest(coarse, Manifest{{100, 91}}, d0), StageResult::kNoError);
  EXPECT_EQ(check_manifest(coarse, Manifest{{100, 90}}, d0), StageResult::kError);
  EXPECT_THROW(check_manifest(coarse, Manifest{{100}}, d0), std::invalid_argument);
}

TEST(BoundSizeTest, AccurateNeverErrs) {
  const Election e = Honest(20000, 0.05);
  for (std::uint64_t s = 0; s < 20; ++s) {
    BallotOracle oracle(e);
    Rng rng(s);
    EXPECT_EQ(bound_size(oracle, e.tabulation().manifest(), 200, 0.0, rng), StageResult::kNoError);
    EXPECT_LE(oracle.ballots_counted(), e.actual_size());
  }
}

// One batch holding tabulated mass p is off by more than delta. With k_tv
// from the calibration, acceptance must stay below alpha_tv.
TEST(BoundSizeTest, PlantedBadMass) {
  const double p = 0.05, alpha_tv = 0.0125;
  std::vector<CvrBatch> rows(20);
  std::vector<BallotBatch> ballots(20);
  std::uint64_t id = 1;
  for (int b = 0; b < 20; ++b) {
    for (int i = 0; i < 100; ++i) {
      rows[b].push_back({make_identifier(id), 1, 0});
      ballots[b].push_back({1, 0, make_identifier(id++)});
    }
  }
  // Batch 0 carries 100/2000 = p of the tabulated mass; drop ten ballots.
  ballots[0].resize(90);
  const Election e(ballots, Tabulation(rows));
  const std::int64_t k = batch_draws_for(p, alpha_tv);
  EXPECT_LE(std::pow(1 - p, static_cast<double>(k)), std::exp(-k * p));
  EXPECT_LE(std::exp(-k * p), alpha_tv);
  const RiskEstimate r = estimate_risk(
      [&](Rng& rng) {
        BallotOracle oracle(e);
        return bound_size(oracle, e.tabulation().manifest(), k, 0.001, rng) == StageResult::kNoError;
      },
      10000, 3);
  EXPECT_LE(r.acceptance_rate, alpha_tv + 3 * std::sqrt(alpha_tv * (1 - alpha_tv) / 10000));
}

TEST(DetectDuplicatesTest, Basics) {
  const Election e = Honest(5000, 0.05);
  const BatchSampler sampler(e.tabulation().manifest());
  BallotOracle oracle(e);
  Rng rng(1);
  EXPECT_EQ(detect_duplicates(oracle, sampler, 1, 5000, rng), DupResult::kNoCollision);
  EXPECT_EQ(detect_duplicates(oracle, sampler, 1000, 5000, rng), DupResult::kNoCollision);
  EXPECT_EQ(detect_duplicates(oracle, sampler, 5000, 5000, rng), DupResult::kEscalate);

  // A single unlabeled ballot in a batch of one is found immediately when drawn.
  const Election blank({{{1, 0, ""}}, {{1, 0, "a"}}}, Tabulation({{{"x", 1, 0}}, {{"a", 1, 0}}}));
  int collisions = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    BallotOracle o(blank);
    Rng r(s);
    collisions += detect_duplicates(o, BatchSampler(blank.tabulation().manifest()), 2, 10, r) == DupResult::kCollision;
  }
  EXPECT_EQ(collisions, 50);
}

TEST(DetectDuplicatesTest, FindsPlantedDuplicates) {
  // 10,000 ballots, of which 2% repeat another ballot's identifier.
  const std::int64_t n = 10000;
  const double kappa = 0.02, alpha_dup = 0.05;
  std::vector<CvrBatch> rows(10);
  std::vector<BallotBatch> ballots(10);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t b = i % 10;
    const std::uint64_t id = i < static_cast<std::int64_t>(kappa * n) ? i + 1 + n / 2 : i + 1;
    rows[b].push_back({make_identifier(i + 1), 1, 0});
    ballots[b].push_back({1, 0, make_identifier(id)});
  }
  const Election e(ballots, Tabulation(rows));
  ASSERT_NEAR(excess_multiplicity_rate(e.batches()), kappa, 1e-12);
  const PhiResult k = phi(0.0, kappa, alpha_dup, n);
  ASSERT_FALSE(k.infeasible);
  const RiskEstimate miss = estimate_risk(
      [&](Rng& rng) {
        BallotOracle oracle(e);
        return detect_duplicates(oracle, BatchSampler(e.tabulation().manifest()), k.k_dup, n + 1, rng) ==
               DupResult::kNoCollision;
      },
      10000, 5);
  EXPECT_LE(miss.acceptance_rate, alpha_dup + 3 * std::sqrt(alpha_dup * (1 - alpha_dup) / 10000));
}

TEST(BasicExperimentTest, ConsistentElectionAlwaysZero) {
  const Election e = Honest(3000, 0.1);
  BallotOracle oracle(e);
  const BatchSampler sampler(e.tabulation().manifest());
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) EXPECT_EQ(basic_experiment(oracle, sampler, e.tabulation(), rng), 0);
}

TEST(BasicExperimentTest, PhantomRowsAreNeverSampled) {
  const AttackFixture f = make_attack(AttackKind::kDirectPhantom);
  BallotOracle oracle(f.election);
  const BatchSampler sampler(f.tab);
  Rng rng(6);
  for (int i = 0; i < 5000; ++i) EXPECT_EQ(basic_experiment(oracle, sampler, f.election.tabulation(), rng), 0);
}

TEST(BasicExperimentTest, EmpiricalLawMatchesEnumeration) {
  const Election e({{{1, 0, "a"}, {0, 1, "b"}, {0, 0, ""}, {0, 1, "zz"}},
                    {{1, 0, "c"}, {1, 0, "d"}, {0, 1, "e"}}},
                   Tabulation({{{"a", 1, 0}, {"b", 1, 0}, {"q", 1, 0}}, {{"c", 1, 0}, {"d", 0, 1}, {"e", 0, 0}}}));
  std::array<double, 5> exact{};
  const double s_tab = e.tabulation().total_size();
  for (std::size_t b = 0; b < e.num_batches(); ++b) {
    for (const auto& ballot : e.batches()[b]) {
      exact[ballot_discrepancy(ballot, e.tabulation()) + 2] +=
          e.tabulation().batch_size(b) / s_tab / e.batches()[b].size();
    }
  }
  BallotOracle oracle(e);
  const BatchSampler sampler(e.tabulation().manifest());
  Rng rng(8);
  const int draws = 100000;
  std::array<int, 5> seen{};
  for (int i = 0; i < draws; ++i) ++seen[basic_experiment(oracle, sampler, e.tabulation(), rng) + 2];
  for (int d = 0; d < 5; ++d) {
    const double se = std::sqrt(exact[d] * (1 - exact[d]) / draws);
    EXPECT_NEAR(static_cast<double>(seen[d]) / draws, exact[d], 3 * se + 1e-12) << "d=" << d - 2;
  }
}

TEST(RunAuditTest, HonestElectionIsAccepted) {
  const Election e = Honest(100000, 0.05);
  const Manifest coarse{e.tabulation().manifest().sizes, ManifestRole::kCoarse};
  int accepted = 0;
  for (std::uint64_t s = 0; s < 40; ++s) accepted += run_audit(e, coarse, AuditParams{}, s).accepted();
  EXPECT_GE(accepted, 36);
}

TEST(RunAuditTest, PsiInfeasibleTouchesNothing) {
  const Election e = Honest(10000, 0.02);
  const Manifest coarse{e.tabulation().manifest().sizes, ManifestRole::kCoarse};
  AuditParams p;
  p.delta = 0.01;
  const AuditOutcome o = run_audit(e, coarse, p, 1);
  EXPECT_FALSE(o.accepted());
  EXPECT_EQ(o.failed_stage, Stage::kPsiInfeasible);
  EXPECT_EQ(o.transcript.ballots_counted, 0);
  EXPECT_EQ(o.transcript.ballots_pulled, 0);
}

TEST(RunAuditTest, CoarseMismatchStopsFirst) {
  const Election e = Honest(10000, 0.02);
  Manifest coarse{e.tabulation().manifest().sizes, ManifestRole::kCoarse};
  coarse.sizes[0] *= 2;
  const AuditOutcome o = run_audit(e, coarse, AuditParams{}, 1);
  EXPECT_EQ(o.failed_stage, Stage::kCheckManifest);
}

TEST(RunAuditTest, ReplayAndCostAccounting) {
  const Election e = Honest(50000, 0.04);
  const Manifest coarse{e.tabulation().manifest().sizes, ManifestRole::kCoarse};
  const AuditOutcome a = run_audit(e, coarse, AuditParams{}, 99);
  const AuditOutcome b = run_audit(e, coarse, AuditParams{}, 99);
  EXPECT_EQ(transcript_to_json(a), transcript_to_json(b));
  EXPECT_EQ(a.transcript.observations, b.transcript.observations);
  EXPECT_EQ(a.transcript.batches_counted, b.transcript.batches_counted);
  ASSERT_TRUE(a.accepted());
  EXPECT_EQ(a.transcript.ballots_pulled, a.transcript.dup_draws + static_cast<std::int64_t>(a.transcript.observations.size()));
  EXPECT_GE(a.transcript.dup_draws, a.transcript.k_dup);
  std::set<std::int64_t> distinct;
  std::int64_t counted = 0;
  for (const auto& [batch, size] : a.transcript.batches_counted) {
    if (distinct.insert(batch).second) counted += size;
  }
  EXPECT_EQ(a.transcript.ballots_counted, counted);
  const nlohmann::json j = transcript_to_json(a);
  EXPECT_EQ(j["verdict"], "Consistent");
  EXPECT_TRUE(j["failed_stage"].is_null());
  EXPECT_EQ(j["seed"], 99u);
}

TEST(RunAuditTest, ReuseFeedsDuplicateDraws) {
  const Election e = Honest(50000, 0.04);
  const Manifest coarse{e.tabulation().manifest().sizes, ManifestRole::kCoarse};
  AuditParams p;
  p.reuse_dup_draws = true;
  const AuditOutcome o = run_audit(e, coarse, p, 3);
  ASSERT_TRUE(o.accepted());
  // The comparison stage stops inside the reused prefix, so nothing extra is pulled.
  EXPECT_EQ(o.transcript.ballots_pulled, o.transcript.dup_draws);
}

// On invalid elections where the certification events hold, one comparison
// draw has expected discrepancy at least the sample margin.
TEST(OneStepDominationTest, RandomSmallElections) {
  Rng rng(12);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const instances::InvalidElection inst = instances::RandomInvalidElection(rng);
    const Election& e = inst.election;
    const ReweightingCertificate c =
        certify_reweighting(e.actual_manifest().sizes, e.tabulation().manifest().sizes, inst.delta, inst.Delta);
    if (!c.within_Delta) continue;
    ++checked;
    const double mu = e.tabulated_margin();
    const double kappa = excess_multiplicity_rate(e.batches());
    const double rhs = std::min(mu / (1 + epsilon(c.p, inst.delta, inst.Delta)),
                                mu * (1 + tau(c.p, inst.delta, inst.Delta)) - tau(c.p, inst.delta, inst.Delta)) -
                       2 * kappa - 4 * gamma_tv(c.p, inst.delta, inst.Delta);
    EXPECT_GE(instances::ExpectedDiscrepancy(e), rhs - 1e-12);
  }
  EXPECT_GT(checked, 100);
}

}  // namespace
}  // namespace rla
