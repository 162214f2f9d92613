#include "rla/efficiency.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "rla/dup_detect.h"
#include "rla/parallel.h"
#include "rla/reweighting.h"

namespace rla {

void DiscrepancyRates::validate() const {
  if (o1 < 0 || u1 < 0 || o2 < 0 || u2 < 0) throw std::invalid_argument("discrepancy rates must be nonnegative");
  if (!(o1 + u1 + o2 + u2 < 1.0)) throw std::invalid_argument("discrepancy rates must sum below 1");
}

void SimulationConfig::validate() const {
  rates.validate();
  if (population < 1) throw std::invalid_argument("population must be positive");
  if (!(margin > 0.0 && margin <= 1.0)) throw std::invalid_argument("margin must lie in (0,1]");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (trials < 1) throw std::invalid_argument("trials must be positive");
  if (!(quantile > 0.0 && quantile < 1.0)) throw std::invalid_argument("quantile must lie in (0,1)");
}

double DiscrepancyLaw::mean() const {
  double m = 0.0;
  for (int d = kMinDiscrepancy; d <= kMaxDiscrepancy; ++d) m += d * at(d);
  return m;
}

DiscrepancyLaw DiscrepancyLaw::padded(double Delta) const {
  if (!(Delta >= 0.0)) throw std::invalid_argument("padding needs Delta >= 0");
  const double q = Delta / (1.0 + Delta);
  DiscrepancyLaw out;
  for (std::size_t i = 0; i < p.size(); ++i) out.p[i] = (1.0 - q) * p[i];
  out.p[4] += q;
  return out;
}

void DiscrepancyLaw::validate() const {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw std::invalid_argument("discrepancy law has a negative entry");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("discrepancy law does not sum to 1");
}

DiscrepancyCounts discrepancy_counts(const SimulationConfig& c) {
  const auto s = static_cast<double>(c.population);
  auto r = [&](double rate) { return static_cast<std::int64_t>(std::llround(rate * s)); };
  return {r(c.rates.o1), r(c.rates.u1), r(c.rates.o2), r(c.rates.u2)};
}

DiscrepancyLaw discrepancy_law(const SimulationConfig& c) {
  c.validate();
  const DiscrepancyCounts k = discrepancy_counts(c);
  const auto s = static_cast<double>(c.population);
  DiscrepancyLaw law;
  law.p[0] = static_cast<double>(k.u2) / s;
  law.p[1] = static_cast<double>(k.u1) / s;
  law.p[3] = static_cast<double>(k.o1) / s;
  law.p[4] = static_cast<double>(k.o2) / s;
  law.p[2] = 1.0 - law.p[0] - law.p[1] - law.p[3] - law.p[4];
  return law;
}

Election generate_election(const SimulationConfig& c, Rng& rng) {
  c.validate();
  const std::int64_t s = c.population;
  const DiscrepancyCounts k = discrepancy_counts(c);
  const auto lead = static_cast<std::int64_t>(std::llround(c.margin * static_cast<double>(s)));
  // Blank rows host the one-vote understatements; parity fixes W - L = lead.
  std::int64_t blanks = k.u1;
  if ((s - blanks - lead) % 2 != 0) ++blanks;
  const std::int64_t w_rows = (s - blanks + lead) / 2;
  const std::int64_t l_rows = (s - blanks - lead) / 2;
  if (lead < 1 || l_rows < 0 || w_rows < k.o1 + k.o2 || l_rows < k.u2) {
    throw std::invalid_argument("generate_election: margin and discrepancy rates are not jointly realizable");
  }

  // Row marks in a random order.
  std::vector<std::int8_t> kind(static_cast<std::size_t>(s));  // 1 = winner row, -1 = loser row, 0 = blank
  std::fill(kind.begin(), kind.begin() + w_rows, 1);
  std::fill(kind.begin() + w_rows, kind.begin() + w_rows + l_rows, -1);
  std::fill(kind.begin() + w_rows + l_rows, kind.end(), 0);
  std::shuffle(kind.begin(), kind.end(), rng);

  std::vector<std::int64_t> w_pos, l_pos, b_pos;
  for (std::int64_t i = 0; i < s; ++i) (kind[i] > 0 ? w_pos : kind[i] < 0 ? l_pos : b_pos).push_back(i);
  std::shuffle(w_pos.begin(), w_pos.end(), rng);
  std::shuffle(l_pos.begin(), l_pos.end(), rng);
  std::shuffle(b_pos.begin(), b_pos.end(), rng);

  std::vector<Ballot> ballot(static_cast<std::size_t>(s));
  std::vector<CvrRow> row(static_cast<std::size_t>(s));
  for (std::int64_t i = 0; i < s; ++i) {
    const int w = kind[i] > 0, l = kind[i] < 0;
    row[i] = CvrRow{make_identifier(static_cast<std::uint64_t>(i) + 1), w, l};
    ballot[i] = Ballot{w, l, row[i].id};
  }
  // o1: winner row, blank ballot. o2: winner row, loser ballot.
  for (std::int64_t j = 0; j < k.o1; ++j) ballot[w_pos[j]].w = 0;
  for (std::int64_t j = k.o1; j < k.o1 + k.o2; ++j) ballot[w_pos[j]] = Ballot{0, 1, ballot[w_pos[j]].id};
  // u1: blank row, winner ballot. u2: loser row, winner ballot.
  for (std::int64_t j = 0; j < k.u1; ++j) ballot[b_pos[j]].w = 1;
  for (std::int64_t j = 0; j < k.u2; ++j) ballot[l_pos[j]] = Ballot{1, 0, ballot[l_pos[j]].id};

  std::vector<BallotBatch> batches;
  std::vector<CvrBatch> cvr;
  for (std::int64_t start = 0; start < s; start += c.batch_size) {
    const std::int64_t end = std::min(s, start + c.batch_size);
    batches.emplace_back(std::make_move_iterator(ballot.begin() + start), std::make_move_iterator(ballot.begin() + end));
    cvr.emplace_back(std::make_move_iterator(row.begin() + start), std::make_move_iterator(row.begin() + end));
  }
  return Election(std::move(batches), Tabulation(std::move(cvr)));
}

std::vector<KmQuantile> km_quantiles(const DiscrepancyLaw& law, double mu_test, const std::vector<double>& alphas,
                                     double gamma, std::int64_t cap, std::int64_t trials, double quantile,
                                     std::uint64_t seed, int threads) {
  law.validate();
  if (alphas.empty()) return {};
  if (trials < 1 || cap < 1) throw std::invalid_argument("km_quantiles: trials and cap must be positive");
  if (!(quantile > 0.0 && quantile < 1.0)) throw std::invalid_argument("km_quantiles: quantile must lie in (0,1)");
  const KmState proto(mu_test, alphas.front(), gamma, cap);
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("km_quantiles: risk limits must lie in (0,1)");
  }

  // Thresholds from highest to lowest; a lower one is never crossed first.
  std::vector<std::size_t> order(alphas.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return alphas[a] > alphas[b]; });
  std::vector<double> threshold(alphas.size());
  for (std::size_t j = 0; j < order.size(); ++j) threshold[j] = std::log(alphas[order[j]]);
  const std::size_t n_thr = threshold.size();

  const double step = proto.log_factor(0);  // < 0
  const double nonzero = 1.0 - law.at(0);
  std::vector<double> nz_weights;
  std::vector<int> nz_values;
  for (int d = kMinDiscrepancy; d <= kMaxDiscrepancy; ++d) {
    if (d != 0) {
      nz_weights.push_back(law.at(d));
      nz_values.push_back(d);
    }
  }
  if (!(nonzero > 0.0)) nz_weights.assign(nz_weights.size(), 1.0);  // never sampled
  const std::discrete_distribution<int>::param_type nz_law(nz_weights.begin(), nz_weights.end());

  // sizes[t * n_thr + j]: stopping size of trial t for threshold j (cap when never crossed).
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(trials) * n_thr, cap);
  const Rng root(seed);
  parallel_for(trials, threads, [&](std::int64_t t) {
    Rng rng = root.split(static_cast<std::uint64_t>(t));
    std::int64_t* out = &sizes[static_cast<std::size_t>(t) * n_thr];
    std::geometric_distribution<std::int64_t> gap_dist(nonzero > 0.0 ? nonzero : 0.5);
    std::discrete_distribution<int> pick;
    double log_p = 0.0;
    std::int64_t n = 0;
    std::size_t j = 0;
    while (j < n_thr && n < cap) {
      const std::int64_t gap = nonzero > 0.0 ? gap_dist(rng) : cap;
      // The zero run covers steps n+1 .. n+gap; threshold j falls s steps in.
      while (j < n_thr) {
        const double need = std::ceil((threshold[j] - log_p) / step);
        const auto s = static_cast<std::int64_t>(std::max(1.0, need));
        if (need > static_cast<double>(gap) || s > cap - n) break;
        out[j++] = n + s;
      }
      if (j == n_thr || gap >= cap - n) break;
      n += gap;
      log_p += static_cast<double>(gap) * step;
      ++n;
      log_p += proto.log_factor(nz_values[pick(rng, nz_law)]);
      while (j < n_thr && log_p <= threshold[j]) out[j++] = n;
    }
  });

  const auto rank = static_cast<std::int64_t>(std::ceil(quantile * static_cast<double>(trials)));
  std::vector<KmQuantile> result(alphas.size());
  std::vector<std::int64_t> column(static_cast<std::size_t>(trials));
  for (std::size_t j = 0; j < n_thr; ++j) {
    for (std::int64_t t = 0; t < trials; ++t) column[t] = sizes[static_cast<std::size_t>(t) * n_thr + j];
    std::nth_element(column.begin(), column.begin() + (rank - 1), column.end());
    const std::int64_t v = column[rank - 1];
    result[order[j]] = KmQuantile{v, v >= cap};
  }
  return result;
}

KmQuantile km_percentile_size(const SimulationConfig& c, double mu_test, double alpha_test, double gamma) {
  return km_quantiles(discrepancy_law(c), mu_test, {alpha_test}, gamma, c.population, c.trials, c.quantile, c.seed,
                      c.threads)
      .front();
}

KmSizeCache::KmSizeCache(std::int64_t trials, double quantile, std::uint64_t seed, double gamma, int threads)
    : trials_(trials), quantile_(quantile), seed_(seed), gamma_(gamma), threads_(threads) {}

KmSizeCache::Key KmSizeCache::key(const DiscrepancyLaw& law, double mu, std::int64_t cap) {
  std::array<std::int64_t, 5> q{};
  for (std::size_t i = 0; i < 5; ++i) q[i] = quantize(law.p[i]);
  return {q, quantize(mu), cap};
}

void KmSizeCache::ensure(const DiscrepancyLaw& law, double mu_test, const std::vector<double>& alphas,
                         std::int64_t cap) {
  const Key k = key(law, mu_test, cap);
  std::vector<double> missing;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = memo_[k];
    std::set<std::int64_t> queued;
    for (double a : alphas) {
      const std::int64_t qa = quantize(a);
      if (!slot.count(qa) && queued.insert(qa).second) missing.push_back(a);
    }
  }
  if (missing.empty()) return;
  const std::vector<KmQuantile> got = km_quantiles(law, mu_test, missing, gamma_, cap, trials_, quantile_, seed_, threads_);
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = memo_[k];
  for (std::size_t i = 0; i < missing.size(); ++i) slot[quantize(missing[i])] = got[i];
  ++simulations_;
}

KmQuantile KmSizeCache::get(const DiscrepancyLaw& law, double mu_test, double alpha, std::int64_t cap) {
  ensure(law, mu_test, {alpha}, cap);
  std::lock_guard<std::mutex> lock(mu_);
  return memo_.at(key(law, mu_test, cap)).at(quantize(alpha));
}

std::size_t KmSizeCache::simulations() const {
  std::lock_guard<std::mutex> lock(mu_);
  return simulations_;
}

void CostModel::validate() const {
  if (!(pull_seconds > 0 && dup_check_seconds > 0 && interpret_seconds_per_race > 0 && manifest_rate > 0 &&
        avg_batch > 0)) {
    throw std::invalid_argument("cost model constants must be positive");
  }
}

const char* to_string(Method m) {
  switch (m) {
    case Method::kDirect:
      return "direct";
    case Method::kComparison:
      return "comparison";
    case Method::kPolling:
      return "polling";
  }
  return "?";
}

const char* to_string(ManifestMode m) { return m == ManifestMode::kFull ? "full" : "statistical"; }

const char* to_string(Objective o) {
  switch (o) {
    case Objective::kMaxSamples:
      return "max_samples";
    case Objective::kTime1Race:
      return "time_1_race";
    case Objective::kTime10Races:
      return "time_10_races";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "direct") return Method::kDirect;
  if (s == "comparison") return Method::kComparison;
  if (s == "polling") return Method::kPolling;
  throw std::invalid_argument("unknown method '" + s + "'");
}

ManifestMode manifest_mode_from_string(const std::string& s) {
  if (s == "full") return ManifestMode::kFull;
  if (s == "statistical") return ManifestMode::kStatistical;
  throw std::invalid_argument("unknown manifest mode '" + s + "'");
}

Objective objective_from_string(const std::string& s) {
  if (s == "max_samples") return Objective::kMaxSamples;
  if (s == "time_1_race") return Objective::kTime1Race;
  if (s == "time_10_races") return Objective::kTime10Races;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

int races_for(Objective o) { return o == Objective::kTime10Races ? 10 : 1; }

std::int64_t BudgetSplit::headline_samples() const {
  return method == Method::kDirect ? std::max(k_dup, k_Sample) : k_Sample;
}

double time_to_audit(const BudgetSplit& s, const CostModel& cost, int races, std::int64_t population) {
  const double manifest = static_cast<double>(s.mode == ManifestMode::kFull ? population : s.k_S) / cost.manifest_rate;
  const double seconds = static_cast<double>(s.pulls) * cost.pull_seconds +
                         static_cast<double>(s.dup_checks) * cost.dup_check_seconds +
                         static_cast<double>(s.interpretations) * cost.interpret_seconds_per_race * races;
  return manifest + seconds / 3600.0;
}

OptimizerGrid OptimizerGrid::defaults() {
  OptimizerGrid g;
  for (int i = 1; i <= 19; ++i) g.rho.push_back(i / 20.0);
  g.alpha_frac = {0.02};
  for (int i = 1; i <= 39; ++i) g.alpha_frac.push_back(i / 40.0);
  g.alpha_frac.push_back(0.98);
  return g;
}

void OptimizeRequest::validate() const {
  if (population < 1) throw std::invalid_argument("optimize: population must be positive");
  if (!(margin > 0.0 && margin < 1.0)) throw std::invalid_argument("optimize: margin must lie in (0,1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("optimize: alpha must lie in (0,1)");
  if (!(delta >= 0.0 && delta <= Delta)) throw std::invalid_argument("optimize: need 0 <= delta <= Delta");
  if (grid.rho.empty() || grid.alpha_frac.empty()) throw std::invalid_argument("optimize: empty grid");
  for (double r : grid.rho) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("optimize: grid margin fractions must lie in (0,1)");
  }
  for (double a : grid.alpha_frac) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("optimize: grid risk fractions must lie in (0,1)");
  }
  rates.validate();
  cost.validate();
}

namespace {

// A split before its comparison/polling sample size is known.
struct Candidate {
  BudgetSplit split;
};

bool better(const BudgetSplit& a, const BudgetSplit& b) {
  if (a.objective_value != b.objective_value) return a.objective_value < b.objective_value;
  if (a.k_S != b.k_S) return a.k_S < b.k_S;
  return a.k_dup < b.k_dup;
}

void fill_effort(BudgetSplit& s) {
  if (s.method == Method::kDirect) {
    // Duplicate-check draws double as comparison draws.
    s.pulls = std::max(s.k_dup, s.k_Sample);
    s.dup_checks = s.k_dup;
  } else {
    s.pulls = s.k_Sample;
    s.dup_checks = 0;
  }
  s.interpretations = s.k_Sample;
}

double objective_value(const OptimizeRequest& req, const BudgetSplit& s) {
  if (req.objective == Objective::kMaxSamples) return static_cast<double>(s.headline_samples());
  return time_to_audit(s, req.cost, races_for(req.objective), req.population);
}

std::int64_t minerva_size(const OptimizeRequest& req, double margin, double alpha) {
  const MinervaParams params = req.minerva_risk_scaled ? MinervaParams::risk_scaled(alpha) : MinervaParams{};
  return minerva_first_round(margin, params);
}

// Enumerates splits whose certification stages are feasible. The comparison
// or polling size is filled in later.
std::vector<Candidate> candidates(const OptimizeRequest& req) {
  const std::int64_t s = req.population;
  const double mu = req.margin;
  const auto manifest_cap = static_cast<std::int64_t>(std::floor(req.manifest_limit * static_cast<double>(s)));
  const std::int64_t dup_cap = std::min(req.dup_limit, s);
  std::vector<Candidate> out;

  auto base = [&] {
    BudgetSplit b;
    b.method = req.method;
    b.mode = req.mode;
    b.k_S = s;
    return b;
  };
  // Manifest certification options: (rho_tv, alpha_tv_frac, p*, k_tv). The
  // full manifest is the single option (0, 0, 0, 0).
  struct TvOption {
    double rho, frac, p;
    std::int64_t k_tv;
  };
  std::vector<TvOption> tv;
  if (req.mode == ManifestMode::kFull) {
    tv.push_back({0.0, 0.0, 0.0, 0});
  } else {
    for (double rho : req.grid.rho) {
      const double target = (1.0 - rho) * mu;
      double p = 0.0;
      switch (req.method) {
        case Method::kDirect:
          p = sup_feasible_p([&](double x) { return retained_margin(mu, x, req.delta, req.Delta); }, target);
          break;
        case Method::kComparison:
          p = sup_feasible_p(
              [&](double x) { return padded_comparison_margin(mu, epsilon(x, req.delta, req.Delta)); }, target);
          break;
        case Method::kPolling:
          p = sup_feasible_p([&](double x) { return mu - polling_margin_adjustment(gamma_tv(x, req.delta, req.Delta)); },
                             target);
          break;
      }
      if (!(p > 0.0)) continue;
      for (double frac : req.grid.alpha_frac) {
        const std::int64_t k_tv = batch_draws_for(p, frac * req.alpha);
        if (k_tv * req.cost.avg_batch > manifest_cap) continue;
        tv.push_back({rho, frac, p, k_tv});
      }
    }
  }

  for (const TvOption& o : tv) {
    BudgetSplit b = base();
    b.rho_tv = o.rho;
    b.alpha_tv_frac = o.frac;
    b.p_star = o.p;
    b.k_tv = o.k_tv;
    if (req.mode == ManifestMode::kStatistical) b.k_S = o.k_tv * req.cost.avg_batch;
    if (req.method != Method::kDirect) {
      b.mu_sample = (1.0 - o.rho) * mu;
      b.alpha_sample = (1.0 - o.frac) * req.alpha;
      out.push_back({b});
      continue;
    }
    const double eps = req.mode == ManifestMode::kFull ? 0.0 : epsilon(o.p, req.delta, req.Delta);
    const double eta = req.mode == ManifestMode::kFull ? 0.0 : eta_dup(o.p, req.delta, req.Delta);
    const auto n_upper = static_cast<std::int64_t>(std::ceil((1.0 + eps) * static_cast<double>(s)));
    for (double rho_dup : req.grid.rho) {
      if (!(o.rho + rho_dup < 1.0 - 1e-12)) continue;
      for (double frac_dup : req.grid.alpha_frac) {
        if (!(o.frac + frac_dup < 1.0 - 1e-12)) continue;
        const PhiResult ph = phi(eta, kappa_dup(mu, rho_dup), frac_dup * req.alpha, n_upper);
        if (ph.infeasible || ph.k_dup > dup_cap) continue;
        BudgetSplit c = b;
        c.rho_dup = rho_dup;
        c.alpha_dup_frac = frac_dup;
        c.k_dup = ph.k_dup;
        c.mu_sample = (1.0 - o.rho - rho_dup) * mu;
        c.alpha_sample = (1.0 - o.frac - frac_dup) * req.alpha;
        out.push_back({c});
      }
    }
  }
  return out;
}

}  // namespace

std::optional<BudgetSplit> optimize_budget(const OptimizeRequest& req, KmSizeCache& cache) {
  req.validate();
  std::vector<Candidate> cands = candidates(req);
  const SimulationConfig sim{req.population, req.margin, req.rates};
  const DiscrepancyLaw law = discrepancy_law(sim);

  if (req.method != Method::kPolling) {
    // One trajectory batch per distinct margin, covering all its risk limits.
    std::map<std::int64_t, std::pair<double, std::vector<double>>> by_mu;
    for (const Candidate& c : cands) {
      auto& slot = by_mu[static_cast<std::int64_t>(std::llround(c.split.mu_sample * 1e12))];
      slot.first = c.split.mu_sample;
      slot.second.push_back(c.split.alpha_sample);
    }
    for (const auto& [q, v] : by_mu) cache.ensure(law, v.first, v.second, req.population);
  }

  std::optional<BudgetSplit> best;
  for (Candidate& c : cands) {
    BudgetSplit& s = c.split;
    if (req.method == Method::kPolling) {
      s.k_Sample = minerva_size(req, s.mu_sample, s.alpha_sample);
      if (s.k_Sample > req.population) continue;
    } else {
      const KmQuantile km = cache.get(law, s.mu_sample, s.alpha_sample, req.population);
      if (km.capped) continue;
      s.k_Sample = km.size;
    }
    fill_effort(s);
    s.objective_value = objective_value(req, s);
    if (!best || better(s, *best)) best = s;
  }
  return best;
}

namespace {

// Hand count of every ballot after a full manifest.
BudgetSplit full_count(const OptimizeRequest& req) {
  BudgetSplit s;
  s.method = req.method;
  s.mode = ManifestMode::kFull;
  s.k_S = req.population;
  s.k_Sample = req.population;
  s.pulls = s.interpretations = req.population;
  s.mu_sample = req.margin;
  s.alpha_sample = req.alpha;
  return s;
}

}  // namespace

PlanComparison compare_plans(OptimizeRequest req, KmSizeCache& cache) {
  const int races = races_for(req.objective);
  PlanComparison pc;
  req.mode = ManifestMode::kFull;
  pc.full = optimize_budget(req, cache);
  const BudgetSplit full = pc.full ? *pc.full : full_count(req);
  pc.full_hours = time_to_audit(full, req.cost, races, req.population);

  req.mode = ManifestMode::kStatistical;
  std::optional<BudgetSplit> stat = optimize_budget(req, cache);
  pc.statistical = full;
  pc.statistical_hours = pc.full_hours;
  if (stat) {
    const double h = time_to_audit(*stat, req.cost, races, req.population);
    if (h < pc.statistical_hours) {
      pc.statistical = stat;
      pc.statistical_hours = h;
    }
  }
  return pc;
}

}  // namespace rla
