#ifndef RLA_EFFICIENCY_H_
#define RLA_EFFICIENCY_H_

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "rla/election.h"
#include "rla/rng.h"
#include "rla/stat_tests.h"

namespace rla {

// Per-ballot rates of one- and two-vote over/understatements.
struct DiscrepancyRates {
  double o1 = 0.001;
  double u1 = 0.001;
  double o2 = 0.0001;
  double u2 = 0.0001;

  void validate() const;
  static DiscrepancyRates zero() { return {0, 0, 0, 0}; }
};

struct SimulationConfig {
  std::int64_t population = 100000;
  double margin = 0.02;
  DiscrepancyRates rates;
  std::int64_t batch_size = 900;
  std::int64_t trials = 1000;
  double quantile = 0.90;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

// Exact per-draw law of one comparison observation, indexed by d + 2.
struct DiscrepancyLaw {
  std::array<double, 5> p{0, 0, 1, 0, 0};

  double at(int d) const { return p[d + 2]; }
  double mean() const;
  // With probability Delta/(1+Delta) the draw lands on a padding row and
  // scores 2; otherwise it follows this law.
  DiscrepancyLaw padded(double Delta) const;
  void validate() const;
};

struct DiscrepancyCounts {
  std::int64_t o1 = 0, u1 = 0, o2 = 0, u2 = 0;
};

// Rounded rate * population for each kind.
DiscrepancyCounts discrepancy_counts(const SimulationConfig& config);
DiscrepancyLaw discrepancy_law(const SimulationConfig& config);

// Population split into batches of `batch_size`, tabulated margin
// round(margin*S)/S, and exactly discrepancy_counts(config) mismatched
// ballot/row pairs placed at random. Throws std::invalid_argument when the
// counts cannot be realized.
Election generate_election(const SimulationConfig& config, Rng& rng);

struct KmQuantile {
  std::int64_t size = 0;
  bool capped = false;  // the quantile trial never reached the risk limit
};

// Quantile of the Kaplan-Markov stopping size over `trials` i.i.d. streams
// from `law`, for each risk limit in `alphas` at once. Trial t uses the stream
// derived from (seed, t) whatever the margin, so neighboring margins share
// randomness. Runs of zero discrepancies are skipped in closed form.
std::vector<KmQuantile> km_quantiles(const DiscrepancyLaw& law, double mu_test, const std::vector<double>& alphas,
                                     double gamma, std::int64_t cap, std::int64_t trials, double quantile,
                                     std::uint64_t seed, int threads = 1);

// Cap is the population.
KmQuantile km_percentile_size(const SimulationConfig& config, double mu_test, double alpha_test,
                              double gamma = kDefaultGamma);

// Memo for km_quantiles keyed by quantized parameters. Safe for concurrent use.
class KmSizeCache {
 public:
  KmSizeCache(std::int64_t trials, double quantile, std::uint64_t seed, double gamma = kDefaultGamma,
              int threads = 1);

  KmQuantile get(const DiscrepancyLaw& law, double mu_test, double alpha, std::int64_t cap);
  // Simulates every (mu, alpha) not cached yet, sharing trajectories per mu.
  void ensure(const DiscrepancyLaw& law, double mu_test, const std::vector<double>& alphas, std::int64_t cap);

  std::size_t simulations() const;

 private:
  using Key = std::tuple<std::array<std::int64_t, 5>, std::int64_t, std::int64_t>;
  static Key key(const DiscrepancyLaw& law, double mu, std::int64_t cap);
  static std::int64_t quantize(double x) { return static_cast<std::int64_t>(x * 1e12 + 0.5); }

  std::int64_t trials_;
  double quantile_;
  std::uint64_t seed_;
  double gamma_;
  int threads_;
  mutable std::mutex mu_;
  std::map<Key, std::map<std::int64_t, KmQuantile>> memo_;
  std::size_t simulations_ = 0;
};

struct CostModel {
  double pull_seconds = 35.0;
  double dup_check_seconds = 10.0;
  double interpret_seconds_per_race = 25.0;
  double manifest_rate = 1538.0;  // ballots per hour
  std::int64_t avg_batch = 900;

  void validate() const;
};

enum class Method { kDirect, kComparison, kPolling };
enum class ManifestMode { kFull, kStatistical };
enum class Objective { kMaxSamples, kTime1Race, kTime10Races };

const char* to_string(Method m);
const char* to_string(ManifestMode m);
const char* to_string(Objective o);
Method method_from_string(const std::string& s);
ManifestMode manifest_mode_from_string(const std::string& s);
Objective objective_from_string(const std::string& s);
int races_for(Objective o);

struct BudgetSplit {
  Method method = Method::kDirect;
  ManifestMode mode = ManifestMode::kFull;
  double rho_tv = 0.0;
  double rho_dup = 0.0;
  double alpha_tv_frac = 0.0;
  double alpha_dup_frac = 0.0;
  double p_star = 0.0;
  std::int64_t k_tv = 0;
  std::int64_t k_S = 0;  // ballots counted for the manifest
  std::int64_t k_dup = 0;
  std::int64_t k_Sample = 0;
  double mu_sample = 0.0;
  double alpha_sample = 0.0;
  std::int64_t pulls = 0;
  std::int64_t dup_checks = 0;
  std::int64_t interpretations = 0;
  double objective_value = 0.0;

  double alpha_sample_frac() const { return 1.0 - alpha_tv_frac - alpha_dup_frac; }
  // Sample size the headline tables report: max(k_dup, k_Sample) for direct
  // selection, k_Sample otherwise.
  std::int64_t headline_samples() const;
};

// Hours to run the audit: manifest construction (population in full mode,
// k_S in statistical mode) at manifest_rate, plus pulls, duplicate checks and
// per-race interpretation.
double time_to_audit(const BudgetSplit& split, const CostModel& cost, int races, std::int64_t population);

struct OptimizerGrid {
  std::vector<double> rho;         // margin fractions
  std::vector<double> alpha_frac;  // risk fractions

  static OptimizerGrid defaults();
};

struct OptimizeRequest {
  std::int64_t population = 0;
  double margin = 0.0;
  double alpha = 0.05;
  double delta = 0.001;
  double Delta = 0.1;
  Method method = Method::kDirect;
  ManifestMode mode = ManifestMode::kFull;
  Objective objective = Objective::kMaxSamples;
  OptimizerGrid grid = OptimizerGrid::defaults();
  DiscrepancyRates rates;
  CostModel cost;
  bool minerva_risk_scaled = false;
  std::int64_t dup_limit = 1000000;  // k_dup <= min(dup_limit, S)
  double manifest_limit = 0.75;      // k_S <= manifest_limit * S

  void validate() const;
};

// Exhaustive search over the grid. Ties go to smaller k_S, then smaller
// k_dup, then grid order. Empty result: no feasible split (escalate to a
// full hand count).
std::optional<BudgetSplit> optimize_budget(const OptimizeRequest& req, KmSizeCache& cache);

// Full-manifest plan versus the cheaper of the statistical and full plans
// under the request's objective; the statistical side never exceeds the full
// side, so the ratio is at least 1.
struct PlanComparison {
  std::optional<BudgetSplit> full;
  std::optional<BudgetSplit> statistical;  // best of statistical and full
  double full_hours = 0.0;
  double statistical_hours = 0.0;
  double ratio() const { return statistical_hours > 0.0 ? full_hours / statistical_hours : 0.0; }
};

PlanComparison compare_plans(OptimizeRequest req, KmSizeCache& cache);

}  // namespace rla

#endif  // RLA_EFFICIENCY_H_
