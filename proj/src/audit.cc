#include "rla/audit.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "rla/dup_detect.h"
#include "rla/parallel.h"

namespace rla {

void AuditParams::validate() const {
  if (!(delta >= 0.0 && delta <= Delta)) throw std::invalid_argument("audit params: need 0 <= delta <= Delta");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("audit params: alpha must lie in (0,1)");
  if (rho_tv < 0.0 || rho_dup < 0.0 || !(rho_tv + rho_dup < 1.0)) {
    throw std::invalid_argument("audit params: need rho_tv, rho_dup >= 0 and rho_tv + rho_dup < 1");
  }
  if (alpha_tv < 0.0 || alpha_dup < 0.0 || !(alpha_tv + alpha_dup < alpha)) {
    throw std::invalid_argument("audit params: need alpha_tv, alpha_dup >= 0 and alpha_tv + alpha_dup < alpha");
  }
  if (run_bound_size && !(rho_tv > 0.0 && alpha_tv > 0.0)) {
    throw std::invalid_argument("audit params: manifest certification needs rho_tv > 0 and alpha_tv > 0");
  }
  if (run_detect_duplicates && !(rho_dup > 0.0 && alpha_dup > 0.0)) {
    throw std::invalid_argument("audit params: duplicate detection needs rho_dup > 0 and alpha_dup > 0");
  }
  if (!(gamma > 1.0)) throw std::invalid_argument("audit params: gamma must exceed 1");
}

AuditParams AuditParams::without_certification(double alpha) {
  AuditParams p;
  p.rho_tv = p.rho_dup = 0.0;
  p.alpha_tv = p.alpha_dup = 0.0;
  p.alpha = alpha;
  p.run_bound_size = false;
  p.run_detect_duplicates = false;
  return p;
}

const char* to_string(Verdict v) { return v == Verdict::kConsistent ? "Consistent" : "Inconclusive"; }

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kCheckManifest:
      return "CheckManifest";
    case Stage::kPsiInfeasible:
      return "PsiInfeasible";
    case Stage::kBoundSize:
      return "BoundSize";
    case Stage::kDetectDuplicates:
      return "DetectDuplicates";
    case Stage::kComparison:
      return "Comparison";
  }
  return "?";
}

BallotOracle::BallotOracle(const Election& e) : batches_(&e.batches()), seen_(e.num_batches(), 0) {
  population_ = e.actual_size();
}

std::int64_t BallotOracle::count_batch(std::size_t b) {
  const auto size = static_cast<std::int64_t>((*batches_)[b].size());
  if (!seen_[b]) {
    seen_[b] = 1;
    counted_ += size;
  }
  return size;
}

const Ballot* BallotOracle::sample_ballot(std::size_t b, Rng& rng, std::int64_t* pos) {
  ++pulled_;
  const BallotBatch& batch = (*batches_)[b];
  if (batch.empty()) return nullptr;
  const auto i = static_cast<std::int64_t>(rng.below(batch.size()));
  if (pos) *pos = i;
  return &batch[i];
}

BatchSampler::BatchSampler(const Manifest& m) {
  if (m.total() <= 0) throw std::invalid_argument("cannot sample batches from an empty manifest");
  law_ = decltype(law_)(m.sizes.begin(), m.sizes.end());
}

std::size_t BatchSampler::operator()(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick;
  return pick(rng, law_);
}

nlohmann::json transcript_to_json(const AuditOutcome& o) {
  const AuditTranscript& t = o.transcript;
  nlohmann::json j;
  j["verdict"] = to_string(o.verdict);
  j["failed_stage"] = o.failed_stage ? nlohmann::json(to_string(*o.failed_stage)) : nlohmann::json(nullptr);
  j["counts"] = {{"ballots_counted", t.ballots_counted},
                 {"ballots_pulled", t.ballots_pulled},
                 {"batch_draws", t.batches_counted.size()},
                 {"dup_draws", t.dup_draws},
                 {"observations", t.observations.size()}};
  j["calibration"] = {{"mu", t.mu},           {"p_tv", t.p_tv},           {"k_tv", t.k_tv},
                      {"n_upper", t.n_upper}, {"k_dup", t.k_dup},         {"mu_sample", t.mu_sample},
                      {"alpha_sample", t.alpha_sample}, {"km_final_log_p", t.km_final_log_p}};
  j["seed"] = t.seed;
  return j;
}

StageResult check_manifest(const Manifest& coarse, const Manifest& tab, double Delta0) {
  if (coarse.num_batches() != tab.num_batches()) throw std::invalid_argument("check_manifest: length mismatch");
  for (std::size_t b = 0; b < tab.num_batches(); ++b) {
    if (!within_factor(static_cast<double>(tab.sizes[b]), static_cast<double>(coarse.sizes[b]), Delta0)) {
      return StageResult::kError;
    }
  }
  return StageResult::kNoError;
}

StageResult bound_size(BallotOracle& oracle, const Manifest& tab, std::int64_t k_tv, double delta, Rng& rng,
                       AuditTranscript* transcript) {
  const BatchSampler sampler(tab);
  for (std::int64_t i = 0; i < k_tv; ++i) {
    const std::size_t b = sampler(rng);
    const std::int64_t size = oracle.count_batch(b);
    if (transcript) transcript->batches_counted.emplace_back(static_cast<std::int64_t>(b), size);
    if (!within_factor(static_cast<double>(size), static_cast<double>(tab.sizes[b]), delta)) return StageResult::kError;
  }
  return StageResult::kNoError;
}

DupResult detect_duplicates(BallotOracle& oracle, const BatchSampler& sampler, std::int64_t k_dup,
                            std::int64_t n_upper, Rng& rng, const Tabulation* tab,
                            std::vector<std::int8_t>* discrepancies) {
  if (k_dup <= 1) return DupResult::kNoCollision;
  if (k_dup >= n_upper) return DupResult::kEscalate;
  std::unordered_set<std::uint64_t> taken;
  std::unordered_set<std::string> ids;
  taken.reserve(static_cast<std::size_t>(k_dup));
  ids.reserve(static_cast<std::size_t>(k_dup));
  for (std::int64_t drawn = 0; drawn < k_dup;) {
    // Every physical ballot drawn already: the whole population is in hand.
    if (static_cast<std::int64_t>(taken.size()) >= oracle.population()) break;
    const std::size_t b = sampler(rng);
    std::int64_t pos = 0;
    const Ballot* ballot = oracle.sample_ballot(b, rng, &pos);
    if (!ballot) return DupResult::kCollision;
    if (!taken.insert((static_cast<std::uint64_t>(b) << 32) | static_cast<std::uint64_t>(pos)).second) continue;
    ++drawn;
    if (tab && discrepancies) discrepancies->push_back(static_cast<std::int8_t>(ballot_discrepancy(*ballot, *tab)));
    if (!ballot->labeled() || !ids.insert(ballot->id).second) return DupResult::kCollision;
  }
  return DupResult::kNoCollision;
}

int basic_experiment(BallotOracle& oracle, const BatchSampler& sampler, const Tabulation& tab, Rng& rng) {
  const Ballot* ballot = oracle.sample_ballot(sampler(rng), rng);
  if (!ballot) return 2;
  return ballot_discrepancy(*ballot, tab);
}

AuditOutcome run_audit(BallotOracle& oracle, const Tabulation& tab, const Manifest& coarse, const AuditParams& params,
                       Rng& rng) {
  params.validate();
  AuditOutcome out;
  AuditTranscript& t = out.transcript;
  t.seed = rng.seed();
  auto finish = [&](std::optional<Stage> failed) {
    out.verdict = failed ? Verdict::kInconclusive : Verdict::kConsistent;
    out.failed_stage = failed;
    t.ballots_counted = oracle.ballots_counted();
    t.ballots_pulled = oracle.ballots_pulled();
    return out;
  };

  const Manifest tab_manifest = tab.manifest();
  const double mu = diluted_margin(tab.total_size(), tab.winner_total(), tab.loser_total());
  t.mu = mu;
  if (check_manifest(coarse, tab_manifest, params.Delta0()) == StageResult::kError) {
    return finish(Stage::kCheckManifest);
  }
  t.alpha_sample = params.alpha_sample();
  t.mu_sample = params.mu_sample(mu);

  PsiResult cert{0.0, 0};
  if (params.run_bound_size) {
    cert = psi(mu, params.rho_tv, params.alpha_tv, params.Delta, params.delta, params.p_override);
    if (!cert.feasible()) return finish(Stage::kPsiInfeasible);
  }
  const ManifestCertificate mc = make_certificate(cert, params.delta, params.Delta, tab.total_size());
  t.p_tv = mc.p_tv;
  t.k_tv = mc.k_tv;
  t.n_upper = mc.n_upper;
  if (params.run_bound_size &&
      bound_size(oracle, tab_manifest, mc.k_tv, params.delta, rng, &t) == StageResult::kError) {
    return finish(Stage::kBoundSize);
  }

  const BatchSampler sampler(tab_manifest);
  std::vector<std::int8_t> reused;
  if (params.run_detect_duplicates) {
    const PhiResult phi_r =
        phi(eta_dup(mc.p_tv, params.delta, params.Delta), params.kappa_dup(mu), params.alpha_dup, mc.n_upper);
    t.k_dup = phi_r.k_dup;
    if (phi_r.infeasible) return finish(Stage::kDetectDuplicates);
    const std::int64_t before = oracle.ballots_pulled();
    const DupResult r = detect_duplicates(oracle, sampler, phi_r.k_dup, mc.n_upper, rng, &tab,
                                          params.reuse_dup_draws ? &reused : nullptr);
    t.dup_draws = oracle.ballots_pulled() - before;
    if (r != DupResult::kNoCollision) return finish(Stage::kDetectDuplicates);
  }

  KmState km(t.mu_sample, t.alpha_sample, params.gamma, std::max<std::int64_t>(mc.n_upper, 1));
  std::size_t next_reused = 0;
  while (!km.stop()) {
    const int d = next_reused < reused.size() ? reused[next_reused++] : basic_experiment(oracle, sampler, tab, rng);
    km.update(d);
    t.observations.push_back(static_cast<std::int8_t>(d));
  }
  t.km_final_log_p = km.log_p_value();
  return finish(km.reject() ? std::nullopt : std::optional<Stage>(Stage::kComparison));
}

AuditOutcome run_audit(const Election& e, const Manifest& coarse, const AuditParams& params, std::uint64_t seed) {
  BallotOracle oracle(e);
  Rng rng(seed);
  return run_audit(oracle, e.tabulation(), coarse, params, rng);
}

RiskEstimate estimate_risk(const std::function<bool(Rng&)>& accepts, std::int64_t trials, std::uint64_t seed,
                           int threads) {
  if (trials < 1) throw std::invalid_argument("estimate_risk: trials must be positive");
  std::vector<char> ok(static_cast<std::size_t>(trials), 0);
  const Rng root(seed);
  parallel_for(trials, threads, [&](std::int64_t i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    ok[i] = accepts(rng) ? 1 : 0;
  });
  RiskEstimate r;
  r.trials = trials;
  for (char c : ok) r.accepted += c;
  r.acceptance_rate = static_cast<double>(r.accepted) / static_cast<double>(trials);
  r.std_error = std::sqrt(r.acceptance_rate * (1.0 - r.acceptance_rate) / static_cast<double>(trials));
  return r;
}

}  // namespace rla
