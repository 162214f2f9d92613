#include "rla/dup_detect.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "rla/parallel.h"
#include "rla/rng.h"

namespace rla {

void DupBudget::validate() const {
  if (!(kappa_dup > 0.0 && kappa_dup < 1.0)) throw std::invalid_argument("kappa_dup must lie in (0,1)");
  if (!(alpha_dup > 0.0 && alpha_dup < 1.0)) throw std::invalid_argument("alpha_dup must lie in (0,1)");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
  if (n_upper < 1) throw std::invalid_argument("population bound must be positive");
}

std::int64_t DupBudget::ell() const {
  return static_cast<std::int64_t>(std::floor(kappa_dup * static_cast<double>(n_upper)));
}

double kappa_dup(double mu, double rho_dup) { return rho_dup * mu / 2.0; }

namespace {

double log_no_collision_bound(std::int64_t k, std::int64_t n, std::int64_t ell, double c) {
  const double x = static_cast<double>(k) / (static_cast<double>(n) * (1.0 + c));
  const double gap = -std::expm1(-x);
  return std::log(2.0) - static_cast<double>(ell) * gap * gap;
}

void check_domain(std::int64_t k, std::int64_t n, double c) {
  if (n < 1 || k < 0) throw std::domain_error("no-collision bound needs n >= 1 and k >= 0");
  if (static_cast<double>(k) > static_cast<double>(n) * (1.0 + c) * (1.0 + 1e-12)) {
    throw std::domain_error("no-collision bound only holds for k <= n(1+c)");
  }
}

}  // namespace

double no_collision_bound(std::int64_t k, std::int64_t n, std::int64_t ell, double c) {
  check_domain(k, n, c);
  return std::min(1.0, std::exp(log_no_collision_bound(k, n, ell, c)));
}

double no_collision_bound_weak(std::int64_t k, std::int64_t n, std::int64_t ell, double c) {
  check_domain(k, n, c);
  const double kk = static_cast<double>(k), nn = static_cast<double>(n) * (1.0 + c);
  return std::min(1.0, 2.0 * std::exp(-kk * kk * static_cast<double>(ell) / (4.0 * nn * nn)));
}

PhiResult phi(const DupBudget& b) {
  b.validate();
  const std::int64_t n = b.n_upper;
  const std::int64_t ell = b.ell();
  const double log_alpha = std::log(b.alpha_dup);
  auto ok = [&](std::int64_t k) { return log_no_collision_bound(k, n, ell, b.eta) <= log_alpha; };
  if (ell < 1 || !ok(n)) return {n, true};
  // Gallop to bracket the threshold, then bisect; ok() is monotone in k.
  std::int64_t hi = 1;
  while (hi < n && !ok(hi)) hi = std::min(n, hi * 2);
  std::int64_t lo = hi / 2;  // !ok(lo) unless lo == 0
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {hi, false};
}

PhiResult phi(double eta, double kappa, double alpha_dup, std::int64_t n_upper) {
  return phi(DupBudget{kappa, alpha_dup, eta, n_upper});
}

std::int64_t phi_weak_closed_form(double eta, double kappa, double alpha_dup, std::int64_t n_upper) {
  return static_cast<std::int64_t>(
      std::ceil(2.0 * (1.0 + eta) * std::sqrt(static_cast<double>(n_upper) * std::log(2.0 / alpha_dup) / kappa)));
}

double collision_oracle(const DiscreteDistribution& sampler, const std::vector<std::int64_t>& labels, std::int64_t k,
                        std::int64_t trials, std::uint64_t seed, int threads) {
  const auto n = static_cast<std::int64_t>(sampler.size());
  if (static_cast<std::int64_t>(labels.size()) != n) throw std::invalid_argument("collision_oracle: label count");
  if (k > n) throw std::invalid_argument("collision_oracle: k exceeds support");
  if (trials < 1) throw std::invalid_argument("collision_oracle: trials must be positive");
  // Dense relabeling so per-trial bookkeeping is a flat array.
  std::unordered_map<std::int64_t, std::int64_t> dense;
  std::vector<std::int64_t> label(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) label[i] = dense.emplace(labels[i], dense.size()).first->second;
  const std::discrete_distribution<std::int64_t>::param_type law(sampler.weights().begin(), sampler.weights().end());
  std::vector<char> clean(static_cast<std::size_t>(trials), 0);
  const Rng root(seed);
  parallel_for(trials, threads, [&](std::int64_t t) {
    Rng rng = root.split(static_cast<std::uint64_t>(t));
    std::discrete_distribution<std::int64_t> pick;
    // Redrawing already-taken items reproduces the renormalized sequential law.
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    std::vector<char> seen(dense.size(), 0);
    for (std::int64_t drawn = 0; drawn < k;) {
      const std::int64_t x = pick(rng, law);
      if (taken[x]) continue;
      taken[x] = 1;
      ++drawn;
      if (seen[label[x]]) return;
      seen[label[x]] = 1;
    }
    clean[t] = 1;
  });
  std::int64_t count = 0;
  for (char c : clean) count += c;
  return static_cast<double>(count) / static_cast<double>(trials);
}

}  // namespace rla
