#include "rla/attacks.h"

#include <gtest/gtest.h>

#include "rla/audit.h"

namespace rla {
namespace {

TEST(AttackFixtureTest, KindNames) {
  for (AttackKind k : {AttackKind::kPollingSizeSwap, AttackKind::kComparisonElide, AttackKind::kDirectPhantom}) {
    EXPECT_EQ(attack_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(attack_kind_from_string("nope"), std::invalid_argument);
  EXPECT_THROW(make_attack(AttackKind::kDirectPhantom, 0), std::invalid_argument);
}

TEST(AttackFixtureTest, AllAreInvalidWithReportedWinnerAhead) {
  for (AttackKind k : {AttackKind::kPollingSizeSwap, AttackKind::kComparisonElide, AttackKind::kDirectPhantom}) {
    const AttackFixture f = make_attack(k, 3);
    EXPECT_FALSE(f.election.valid()) << to_string(k);
    EXPECT_GT(f.election.tabulated_margin(), 0.0) << to_string(k);
    EXPECT_EQ(f.election.actual_size(), 300);
    EXPECT_EQ(f.election.actual_winner(), 147);
    EXPECT_EQ(f.election.actual_loser(), 153);
    EXPECT_EQ(f.coarse.num_batches(), 6u);
    // The coarse manifest passes the check the full auditor runs.
    EXPECT_EQ(check_manifest(f.coarse, f.tab, AuditParams{}.Delta0()), StageResult::kNoError) << to_string(k);
  }
}

TEST(AttackFixtureTest, PollingSwapReversesObservedMargin) {
  const AttackFixture f = make_attack(AttackKind::kPollingSizeSwap);
  EXPECT_EQ(f.tab.sizes, (std::vector<std::int64_t>{51, 49}));
  // Batch by tabulated size, then a uniform ballot: E[W - L] per draw.
  const double s = f.tab.total();
  double drift = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& batch = f.election.batches()[b];
    double net = 0;
    for (const auto& ballot : batch) net += ballot.net();
    drift += f.tab.sizes[b] / s * net / batch.size();
  }
  EXPECT_NEAR(drift, 0.02, 1e-12);
  EXPECT_NEAR(f.election.actual_margin(), -0.02, 1e-12);
}

TEST(AttackFixtureTest, RowSamplingNeverSeesDiscrepancy) {
  const AttackFixture f = make_attack(AttackKind::kComparisonElide);
  EXPECT_EQ(f.tab.sizes, (std::vector<std::int64_t>{49, 47}));
  for (const auto& batch : f.election.tabulation().batches()) {
    for (const auto& row : batch) {
      int matches = 0;
      for (const auto& bb : f.election.batches()) {
        for (const auto& ballot : bb) {
          if (ballot.id == row.id) {
            ++matches;
            EXPECT_EQ(ballot.net(), row.net());
          }
        }
      }
      EXPECT_EQ(matches, 1);
    }
  }
}

TEST(AttackFixtureTest, PhantomRowsHideBehindSharedIdentifiers) {
  const AttackFixture f = make_attack(AttackKind::kDirectPhantom);
  EXPECT_EQ(f.tab.sizes, (std::vector<std::int64_t>{49, 51}));
  EXPECT_EQ(f.election.actual_manifest().sizes, f.tab.sizes);
  const auto& rows = f.election.tabulation().batches()[1];
  const auto& ballots = f.election.batches()[1];
  int phantom = 0;
  for (const auto& row : rows) {
    int carriers = 0;
    for (const auto& ballot : ballots) carriers += ballot.id == row.id;
    phantom += carriers == 0;
    EXPECT_LE(carriers, 2);
  }
  EXPECT_EQ(phantom, 2);
  // Every ballot agrees with the row its identifier points to.
  for (const auto& batch : f.election.batches()) {
    for (const auto& ballot : batch) EXPECT_EQ(ballot_discrepancy(ballot, f.election.tabulation()), 0);
  }
  EXPECT_NEAR(excess_multiplicity_rate(f.election.batches()), 0.02, 1e-12);
}

TEST(NaiveAuditorsTest, AreFooled) {
  const AttackFixture poll = make_attack(AttackKind::kPollingSizeSwap, 1000);
  const AttackFixture comp = make_attack(AttackKind::kComparisonElide, 100);
  const AttackFixture dir = make_attack(AttackKind::kDirectPhantom, 100);
  const RowSamplingComparison rows(comp.election);
  const auto p = estimate_risk([&](Rng& r) { return naive_polling_audit(poll.election, 0.05, r); }, 200, 1);
  const auto c = estimate_risk([&](Rng& r) { return rows.audit(0.05, kDefaultGamma, r); }, 200, 1);
  const auto d = estimate_risk([&](Rng& r) { return naive_direct_audit(dir.election, dir.coarse, 0.05, r); }, 200, 1);
  EXPECT_GE(p.acceptance_rate, 0.5);
  EXPECT_EQ(c.acceptance_rate, 1.0);
  EXPECT_EQ(d.acceptance_rate, 1.0);
}

TEST(FullAuditorTest, RejectsEveryAttack) {
  for (AttackKind k : {AttackKind::kPollingSizeSwap, AttackKind::kComparisonElide, AttackKind::kDirectPhantom}) {
    const AttackFixture f = make_attack(k, 100);
    const auto r = estimate_risk([&](Rng& rng) { return full_direct_audit(f.election, f.coarse, AuditParams{}, rng); },
                                 300, 2);
    EXPECT_LE(r.acceptance_rate, 0.05 + 3 * r.std_error) << to_string(k);
  }
}

TEST(FullAuditorTest, OnlyDuplicateDetectionCatchesPhantoms) {
  const AttackFixture f = make_attack(AttackKind::kDirectPhantom, 100);
  AuditParams without = AuditParams{};
  without.run_detect_duplicates = false;
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_TRUE(run_audit(f.election, f.coarse, without, s).accepted());
  int dup_failures = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const AuditOutcome o = run_audit(f.election, f.coarse, AuditParams{}, s);
    dup_failures += o.failed_stage == Stage::kDetectDuplicates;
  }
  EXPECT_GE(dup_failures, 48);
}

}  // namespace
}  // namespace rla
