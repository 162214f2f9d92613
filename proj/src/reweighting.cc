#include "rla/reweighting.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rla {

void DistortionParams::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0,1]");
  if (!(delta >= 0.0 && delta <= Delta)) throw std::invalid_argument("need 0 <= delta <= Delta");
}

double epsilon(double p, double delta, double Delta) { return (1.0 - p) * delta + p * Delta; }

double tau(double p, double delta, double Delta) {
  return 1.0 / ((1.0 - p) / (1.0 + delta) + p / (1.0 + Delta)) - 1.0;
}

double gamma_tv(double p, double delta, double Delta) {
  return delta / (2.0 + delta) + (1.0 + delta) * p * Delta / (1.0 + delta * p);
}

double eta_dup(double p, double delta, double Delta) { return (1.0 + Delta) * (1.0 + epsilon(p, delta, Delta)) - 1.0; }

double retained_margin(double mu, double p, double delta, double Delta) {
  const double e = epsilon(p, delta, Delta);
  const double t = tau(p, delta, Delta);
  return std::min(mu / (1.0 + e), mu * (1.0 + t) - t) - 4.0 * gamma_tv(p, delta, Delta);
}

bool within_factor(double value, double reference, double x) {
  // 1+x is rarely exact in binary, hence the relative slack.
  constexpr double kSlack = 1.0 + 1e-12;
  return value * (1.0 + x) * kSlack >= reference && value <= (1.0 + x) * reference * kSlack;
}

double delta0_from(double Delta) { return std::sqrt(1.0 + Delta) - 1.0; }

double sup_feasible_p(const std::function<double(double)>& f, double target) {
  if (f(0.0) < target) return 0.0;
  if (f(1.0) >= target) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::int64_t batch_draws_for(double p, double alpha_tv) {
  if (!(p > 0.0)) throw std::domain_error("batch draws need p > 0");
  if (!(alpha_tv > 0.0 && alpha_tv < 1.0)) throw std::domain_error("alpha_tv must lie in (0,1)");
  return static_cast<std::int64_t>(std::ceil(std::log(1.0 / alpha_tv) / p));
}

PsiResult psi(double mu, double rho_tv, double alpha_tv, double Delta, double delta, std::optional<double> p_override) {
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("psi: margin must lie in (0,1]");
  if (!(rho_tv >= 0.0 && rho_tv < 1.0)) throw std::invalid_argument("psi: rho_tv must lie in [0,1)");
  if (!(alpha_tv > 0.0 && alpha_tv < 1.0)) throw std::invalid_argument("psi: alpha_tv must lie in (0,1)");
  DistortionParams{0.0, delta, Delta}.validate();
  PsiResult r;
  r.p_star = sup_feasible_p([&](double p) { return retained_margin(mu, p, delta, Delta); }, (1.0 - rho_tv) * mu);
  if (p_override) {
    if (!(*p_override > 0.0 && *p_override <= r.p_star)) {
      throw std::invalid_argument("psi: p override must lie in (0, p*]");
    }
    r.p_star = *p_override;
  }
  if (r.feasible()) r.k_tv = batch_draws_for(r.p_star, alpha_tv);
  return r;
}

ManifestCertificate make_certificate(const PsiResult& psi, double delta, double Delta, std::int64_t s_tab) {
  ManifestCertificate c;
  c.p_tv = psi.p_star;
  c.delta = delta;
  c.Delta = Delta;
  c.k_tv = psi.k_tv;
  c.epsilon = epsilon(psi.p_star, delta, Delta);
  c.n_upper = static_cast<std::int64_t>(std::ceil((1.0 + c.epsilon) * static_cast<double>(s_tab)));
  return c;
}

DiscreteDistribution::DiscreteDistribution(std::vector<double> weights) : w_(std::move(weights)) {
  double sum = 0.0;
  for (double x : w_) {
    if (!(x >= 0.0)) throw std::invalid_argument("distribution has a negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("distribution sums to " + std::to_string(sum));
}

DiscreteDistribution DiscreteDistribution::from_masses(const std::vector<double>& masses) {
  double sum = 0.0;
  for (double x : masses) {
    if (!(x >= 0.0)) throw std::invalid_argument("negative mass");
    sum += x;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("masses sum to zero");
  std::vector<double> w(masses.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = masses[i] / sum;
  DiscreteDistribution d;
  d.w_ = std::move(w);
  return d;
}

DiscreteDistribution DiscreteDistribution::from_counts(const std::vector<std::int64_t>& counts) {
  return from_masses(std::vector<double>(counts.begin(), counts.end()));
}

double tv_distance(const DiscreteDistribution& a, const DiscreteDistribution& b) {
  if (a.size() != b.size()) throw std::invalid_argument("tv_distance: support sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

ReweightingCertificate certify_reweighting(const std::vector<std::int64_t>& actual,
                                           const std::vector<std::int64_t>& tab, double delta, double Delta) {
  if (actual.size() != tab.size() || tab.empty()) throw std::invalid_argument("certify_reweighting: length mismatch");
  ReweightingCertificate c;
  std::int64_t m_total = 0, bad_mass = 0;
  for (std::size_t i = 0; i < tab.size(); ++i) {
    if (tab[i] <= 0) throw std::invalid_argument("certify_reweighting: zero tabulated batch " + std::to_string(i));
    m_total += tab[i];
    const double n = static_cast<double>(actual[i]), m = static_cast<double>(tab[i]);
    if (!within_factor(n, m, delta)) {
      c.bad.push_back(i);
      bad_mass += tab[i];
    }
    if (!within_factor(n, m, Delta)) c.within_Delta = false;
  }
  c.p = static_cast<double>(bad_mass) / static_cast<double>(m_total);
  return c;
}

}  // namespace rla
