#ifndef RLA_AUDIT_H_
#define RLA_AUDIT_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rla/election.h"
#include "rla/reweighting.h"
#include "rla/rng.h"
#include "rla/stat_tests.h"

namespace rla {

struct AuditParams {
  double delta = 0.001;
  double Delta = 0.1;
  double rho_tv = 0.25;
  double rho_dup = 0.25;
  double alpha = 0.05;
  double alpha_tv = 0.0125;
  double alpha_dup = 0.0125;
  double gamma = kDefaultGamma;
  // Force a smaller manifest-error mass than the calibrated maximum.
  std::optional<double> p_override;
  // Feed the duplicate-check draws to the comparison test before drawing
  // fresh ballots.
  bool reuse_dup_draws = false;
  // Turning these off yields a deliberately unsound auditor; used only to
  // demonstrate the attacks they defend against.
  bool run_bound_size = true;
  bool run_detect_duplicates = true;

  // Throws std::invalid_argument when the budget constraints fail.
  void validate() const;
  double Delta0() const { return delta0_from(Delta); }
  double alpha_sample() const { return alpha - alpha_dup - alpha_tv; }
  double mu_sample(double mu) const { return (1.0 - rho_tv - rho_dup) * mu; }
  double kappa_dup(double mu) const { return rho_dup * mu / 2.0; }

  // Same split with both certification stages switched off and the whole
  // risk spent on the comparison test.
  static AuditParams without_certification(double alpha);
};

enum class Verdict { kConsistent, kInconclusive };
enum class Stage { kCheckManifest, kPsiInfeasible, kBoundSize, kDetectDuplicates, kComparison };

const char* to_string(Verdict v);
const char* to_string(Stage s);

// Physical access to the ballots, with cost counters. Counting a batch the
// first time costs its size; recounts are free.
class BallotOracle {
 public:
  explicit BallotOracle(const Election& e);

  std::size_t num_batches() const { return batches_->size(); }
  std::int64_t population() const { return population_; }

  std::int64_t count_batch(std::size_t b);
  // Uniform ballot from batch b, or nullptr for an empty batch. `pos` gets
  // the ballot's position in the batch.
  const Ballot* sample_ballot(std::size_t b, Rng& rng, std::int64_t* pos = nullptr);

  std::int64_t ballots_counted() const { return counted_; }
  std::int64_t ballots_pulled() const { return pulled_; }

 private:
  const std::vector<BallotBatch>* batches_;
  std::vector<char> seen_;
  std::int64_t population_ = 0;
  std::int64_t counted_ = 0;
  std::int64_t pulled_ = 0;
};

// Batch selection with probability proportional to a manifest.
class BatchSampler {
 public:
  explicit BatchSampler(const Manifest& m);
  std::size_t operator()(Rng& rng) const;

 private:
  std::discrete_distribution<std::size_t>::param_type law_;
};

struct AuditTranscript {
  std::uint64_t seed = 0;
  double mu = 0.0;
  double p_tv = 0.0;
  std::int64_t k_tv = 0;
  std::int64_t n_upper = 0;
  std::int64_t k_dup = 0;
  double mu_sample = 0.0;
  double alpha_sample = 0.0;
  std::vector<std::pair<std::int64_t, std::int64_t>> batches_counted;  // (batch, size) per draw
  std::int64_t ballots_counted = 0;
  std::int64_t ballots_pulled = 0;
  std::int64_t dup_draws = 0;
  std::vector<std::int8_t> observations;
  double km_final_log_p = 0.0;
};

struct AuditOutcome {
  Verdict verdict = Verdict::kInconclusive;
  std::optional<Stage> failed_stage;
  AuditTranscript transcript;

  bool accepted() const { return verdict == Verdict::kConsistent; }
};

nlohmann::json transcript_to_json(const AuditOutcome& outcome);

enum class StageResult { kNoError, kError };
enum class DupResult { kNoCollision, kCollision, kEscalate };

// Error iff some tabulated size falls outside [coarse/(1+Delta0), (1+Delta0) coarse].
StageResult check_manifest(const Manifest& coarse, const Manifest& tab, double Delta0);

// k_tv batch draws from the tabulated law; Error on the first batch whose
// count is outside a factor 1+delta of its tabulated size.
StageResult bound_size(BallotOracle& oracle, const Manifest& tab, std::int64_t k_tv, double delta, Rng& rng,
                       AuditTranscript* transcript = nullptr);

// k_dup ballot draws without replacement (batch by `sampler`, then uniform).
// Collision on a repeated identifier or any unlabeled ballot. Escalate when
// k_dup reaches `n_upper`. When `discrepancies` is given, the discrepancy of
// each drawn ballot is appended to it.
DupResult detect_duplicates(BallotOracle& oracle, const BatchSampler& sampler, std::int64_t k_dup,
                            std::int64_t n_upper, Rng& rng, const Tabulation* tab = nullptr,
                            std::vector<std::int8_t>* discrepancies = nullptr);

// One comparison observation. An empty batch yields 2.
int basic_experiment(BallotOracle& oracle, const BatchSampler& sampler, const Tabulation& tab, Rng& rng);

AuditOutcome run_audit(BallotOracle& oracle, const Tabulation& tab, const Manifest& coarse, const AuditParams& params,
                       Rng& rng);
// Convenience: fresh oracle over `e`, stream seeded by `seed`.
AuditOutcome run_audit(const Election& e, const Manifest& coarse, const AuditParams& params, std::uint64_t seed);

struct RiskEstimate {
  std::int64_t trials = 0;
  std::int64_t accepted = 0;
  double acceptance_rate = 0.0;
  double std_error = 0.0;
};

// Seeded Monte-Carlo acceptance frequency of `accepts` (called with a fresh
// stream per trial) with its binomial standard error.
RiskEstimate estimate_risk(const std::function<bool(Rng&)>& accepts, std::int64_t trials, std::uint64_t seed,
                           int threads = 1);

}  // namespace rla

#endif  // RLA_AUDIT_H_
