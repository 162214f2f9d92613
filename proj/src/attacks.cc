#include "rla/attacks.h"

#include <stdexcept>

namespace rla {

const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kPollingSizeSwap:
      return "polling_size_swap";
    case AttackKind::kComparisonElide:
      return "comparison_elide";
    case AttackKind::kDirectPhantom:
      return "direct_phantom";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "polling_size_swap") return AttackKind::kPollingSizeSwap;
  if (s == "comparison_elide") return AttackKind::kComparisonElide;
  if (s == "direct_phantom") return AttackKind::kDirectPhantom;
  throw std::invalid_argument("unknown attack kind '" + s + "'");
}

namespace {

struct BatchSpec {
  int ballots;       // physical ballots, all voting for `vote_w ? winner : loser`
  bool vote_w;
  int listed;        // how many of them get a CVR row
  int phantom_rows;  // extra rows with no ballot behind them
  std::int64_t coarse;
  int shared = 0;    // ballots that copy the identifier of the ballot before them
};

}  // namespace

AttackFixture make_attack(AttackKind kind, std::int64_t replication) {
  if (replication < 1) throw std::invalid_argument("replication must be positive");
  BatchSpec w{}, l{};
  switch (kind) {
    case AttackKind::kPollingSizeSwap:
      w = {49, true, 49, 2, 50};
      l = {51, false, 49, 0, 50};
      break;
    case AttackKind::kComparisonElide:
      w = {49, true, 49, 0, 49};
      l = {51, false, 47, 0, 49};
      break;
    case AttackKind::kDirectPhantom:
      w = {49, true, 49, 0, 49};
      l = {51, false, 49, 2, 51, 2};
      break;
  }
  std::uint64_t next_id = 1;
  std::vector<BallotBatch> ballots;
  std::vector<CvrBatch> cvr;
  Manifest coarse{{}, ManifestRole::kCoarse};
  for (std::int64_t r = 0; r < replication; ++r) {
    for (const BatchSpec* spec : {&w, &l}) {
      BallotBatch bb;
      CvrBatch rows;
      const int vw = spec->vote_w ? 1 : 0;
      int listed = 0;
      for (int i = 0; i < spec->ballots; ++i) {
        const bool copy = i % 2 == 1 && i < 2 * spec->shared;
        bb.push_back(Ballot{vw, 1 - vw, copy ? bb.back().id : make_identifier(next_id++)});
        if (!copy && listed < spec->listed) {
          rows.push_back(CvrRow{bb.back().id, vw, 1 - vw});
          ++listed;
        }
      }
      for (int i = 0; i < spec->phantom_rows; ++i) rows.push_back(CvrRow{make_identifier(next_id++), 1, 0});
      ballots.push_back(std::move(bb));
      cvr.push_back(std::move(rows));
      coarse.sizes.push_back(spec->coarse);
    }
  }
  Tabulation tab(std::move(cvr));
  Manifest tab_manifest = tab.manifest();
  return AttackFixture{kind, replication, Election(std::move(ballots), std::move(tab)), std::move(coarse),
                       std::move(tab_manifest)};
}

bool naive_polling_audit(const Election& e, double alpha, Rng& rng) {
  const Tabulation& tab = e.tabulation();
  const double share = static_cast<double>(tab.winner_total()) /
                       static_cast<double>(tab.winner_total() + tab.loser_total());
  BravoState bravo(share, alpha, tab.total_size());
  BallotOracle oracle(e);
  const BatchSampler sampler(tab.manifest());
  while (!bravo.stop()) {
    const Ballot* b = oracle.sample_ballot(sampler(rng), rng);
    // An empty batch yields no ballot; count the draw as a loser vote.
    if (b) {
      bravo.update(b->w, b->l);
    } else {
      bravo.update(0, 1);
    }
  }
  return bravo.reject();
}

RowSamplingComparison::RowSamplingComparison(const Election& e) : e_(&e) {
  for (const auto& batch : e.batches()) {
    for (const auto& b : batch) {
      if (b.labeled()) by_id_.emplace(b.id, &b);
    }
  }
}

bool RowSamplingComparison::audit(double alpha, double gamma, Rng& rng) const {
  const Tabulation& tab = e_->tabulation();
  KmState km(e_->tabulated_margin(), alpha, gamma, tab.total_size());
  const BatchSampler sampler(tab.manifest());
  while (!km.stop()) {
    const CvrBatch& rows = tab.batches()[sampler(rng)];
    const CvrRow& row = rows[rng.below(rows.size())];
    auto it = by_id_.find(row.id);
    km.update(it == by_id_.end() ? 2 : row.net() - it->second->net());
  }
  return km.reject();
}

bool naive_direct_audit(const Election& e, const Manifest& coarse, double alpha, Rng& rng) {
  BallotOracle oracle(e);
  return run_audit(oracle, e.tabulation(), coarse, AuditParams::without_certification(alpha), rng).accepted();
}

bool full_direct_audit(const Election& e, const Manifest& coarse, const AuditParams& params, Rng& rng) {
  BallotOracle oracle(e);
  return run_audit(oracle, e.tabulation(), coarse, params, rng).accepted();
}

}  // namespace rla
