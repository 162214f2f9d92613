#ifndef RLA_REWEIGHTING_H_
#define RLA_REWEIGHTING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace rla {

// Distortion profile of a contaminated reweighting: all weights within 1+delta
// except on a set of mass at most p, where they are within 1+Delta.
struct DistortionParams {
  double p = 0.0;
  double delta = 0.0;
  double Delta = 0.0;

  void validate() const;
};

double epsilon(double p, double delta, double Delta);
double tau(double p, double delta, double Delta);
double gamma_tv(double p, double delta, double Delta);
double eta_dup(double p, double delta, double Delta);

// min{mu/(1+eps), mu(1+tau) - tau} - 4 Gamma_tv. Negative values are allowed.
double retained_margin(double mu, double p, double delta, double Delta);

// reference/(1+x) <= value <= (1+x)*reference, endpoints inclusive.
bool within_factor(double value, double reference, double x);

// Batch-accuracy threshold implied by a coarse manifest of accuracy Delta:
// (1 + Delta0)^2 = 1 + Delta.
double delta0_from(double Delta);

// sup{p in [0,1] : f(p) >= target} for a nonincreasing f, by 60 rounds of
// bisection. Returns 0 when f(0) < target.
double sup_feasible_p(const std::function<double(double)>& f, double target);

struct PsiResult {
  double p_star = 0.0;
  std::int64_t k_tv = 0;

  bool feasible() const { return p_star > 0.0; }
};

// k_tv = ceil(ln(1/alpha_tv)/p).
std::int64_t batch_draws_for(double p, double alpha_tv);

// p* = sup{p : L_mu(p) >= (1 - rho_tv) mu} and the matching batch-draw count.
// `p_override`, when set, must not exceed p*; it trades a smaller later loss
// for more batch draws.
PsiResult psi(double mu, double rho_tv, double alpha_tv, double Delta, double delta,
              std::optional<double> p_override = std::nullopt);

struct ManifestCertificate {
  double p_tv = 0.0;
  double delta = 0.0;
  double Delta = 0.0;
  std::int64_t k_tv = 0;
  double epsilon = 0.0;
  std::int64_t n_upper = 0;
};

ManifestCertificate make_certificate(const PsiResult& psi, double delta, double Delta, std::int64_t s_tab);

// Probability vector; entries are nonnegative and sum to one.
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;
  // Throws std::invalid_argument on negative entries or a sum off by more
  // than 1e-12.
  explicit DiscreteDistribution(std::vector<double> weights);
  // Normalizes nonnegative masses (e.g. batch sizes).
  static DiscreteDistribution from_masses(const std::vector<double>& masses);
  static DiscreteDistribution from_counts(const std::vector<std::int64_t>& counts);

  const std::vector<double>& weights() const { return w_; }
  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }

 private:
  std::vector<double> w_;
};

double tv_distance(const DiscreteDistribution& a, const DiscreteDistribution& b);

struct ReweightingCertificate {
  std::vector<std::size_t> bad;  // ratios outside [1/(1+delta), 1+delta]
  double p = 0.0;                // tabulated mass of the bad set
  bool within_Delta = true;      // every ratio inside [1/(1+Delta), 1+Delta]
};

ReweightingCertificate certify_reweighting(const std::vector<std::int64_t>& actual,
                                           const std::vector<std::int64_t>& tab, double delta, double Delta);

}  // namespace rla

#endif  // RLA_REWEIGHTING_H_
