#ifndef RLA_DUP_DETECT_H_
#define RLA_DUP_DETECT_H_

#include <cstdint>
#include <vector>

#include "rla/reweighting.h"

namespace rla {

struct DupBudget {
  double kappa_dup = 0.0;
  double alpha_dup = 0.0;
  double eta = 0.0;
  std::int64_t n_upper = 0;

  void validate() const;
  std::int64_t ell() const;
};

double kappa_dup(double mu, double rho_dup);

// Upper bound on Pr[no identifier collision among k sequential draws] from n
// items with ell excess duplicates and a sampler within factor 1+c of
// uniform: min(1, 2 exp(-ell (1 - e^{-k/(n(1+c))})^2)). Needs k <= n(1+c).
double no_collision_bound(std::int64_t k, std::int64_t n, std::int64_t ell, double c);
// The looser quadratic form 2 exp(-k^2 ell / (4 n^2 (1+c)^2)).
double no_collision_bound_weak(std::int64_t k, std::int64_t n, std::int64_t ell, double c);

struct PhiResult {
  std::int64_t k_dup = 0;
  bool infeasible = false;  // bound not met even at k = n_upper
};

// Smallest k with no_collision_bound(k, N, floor(kappa N), eta) <= alpha_dup,
// capped at N.
PhiResult phi(double eta, double kappa_dup, double alpha_dup, std::int64_t n_upper);
PhiResult phi(const DupBudget& b);

// 2(1+eta) sqrt(N ln(2/alpha) / kappa), rounded up.
std::int64_t phi_weak_closed_form(double eta, double kappa_dup, double alpha_dup, std::int64_t n_upper);

// Monte-Carlo probability that k draws without replacement (each draw from the
// sampler renormalized over the items not yet drawn) see no repeated label.
// Trial t uses a stream derived from (seed, t), so the estimate does not
// depend on the thread count.
double collision_oracle(const DiscreteDistribution& sampler, const std::vector<std::int64_t>& labels, std::int64_t k,
                        std::int64_t trials, std::uint64_t seed, int threads = 1);

}  // namespace rla

#endif  // RLA_DUP_DETECT_H_
