#include "rla/cli.h"

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rla/attacks.h"
#include "rla/audit.h"
#include "rla/dup_detect.h"
#include "rla/efficiency.h"
#include "rla/election_json.h"
#include "rla/reweighting.h"
#include "rla/stat_tests.h"
#include "rla/tables.h"

namespace rla {

using nlohmann::json;

namespace {

// Raised for configurations that are well formed but admit no audit.
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> mu, alpha, delta, Delta;
  std::optional<double> rho_tv, rho_dup, alpha_tv, alpha_dup;
  std::optional<std::int64_t> size, trials, replication;
  std::optional<std::string> objective, kind, method, mode;
};

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open scenario '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in '" + path + "': " + e.what());
  }
}

json scenario_of(const Flags& f) { return f.scenario.empty() ? json::object() : load_json(f.scenario); }

template <typename T>
T pick(const std::optional<T>& flag, const json& file, const char* key, T fallback) {
  if (flag) return *flag;
  if (file.contains(key)) {
    try {
      return file.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(std::string("scenario key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

template <typename T>
T require(const std::optional<T>& flag, const json& file, const char* key, const char* flag_name) {
  if (!flag && !file.contains(key)) throw std::invalid_argument(std::string("missing ") + flag_name);
  return pick<T>(flag, file, key, T{});
}

DiscrepancyRates rates_of(const json& file) {
  DiscrepancyRates r;
  if (file.contains("rates")) {
    const json& j = file.at("rates");
    r = {j.value("o1", r.o1), j.value("u1", r.u1), j.value("o2", r.o2), j.value("u2", r.u2)};
  }
  r.validate();
  return r;
}

void emit(const json& doc, const Flags& f, std::ostream& out) {
  out << doc.dump(2) << '\n';
  if (!f.out.empty()) {
    std::ofstream file(f.out);
    if (!file) throw std::invalid_argument("cannot write '" + f.out + "'");
    file << doc.dump(2) << '\n';
  }
}

AuditParams audit_params(const Flags& f, const json& file) {
  AuditParams p;
  p.alpha = pick(f.alpha, file, "alpha", p.alpha);
  p.delta = pick(f.delta, file, "delta", p.delta);
  p.Delta = pick(f.Delta, file, "Delta", p.Delta);
  p.rho_tv = pick(f.rho_tv, file, "rho_tv", p.rho_tv);
  p.rho_dup = pick(f.rho_dup, file, "rho_dup", p.rho_dup);
  p.alpha_tv = pick(f.alpha_tv, file, "alpha_tv", p.alpha / 4);
  p.alpha_dup = pick(f.alpha_dup, file, "alpha_dup", p.alpha / 4);
  p.validate();
  return p;
}

int calibrate(const Flags& f, std::ostream& out) {
  const json file = scenario_of(f);
  const double mu = require(f.mu, file, "mu", "--mu");
  const std::int64_t size = require(f.size, file, "population", "--size");
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("--mu must lie in (0,1]");
  if (size < 1) throw std::invalid_argument("--size must be positive");
  const AuditParams p = audit_params(f, file);

  json doc = {{"mu", mu}, {"size", size}, {"kappa_dup", p.kappa_dup(mu)}, {"mu_sample", p.mu_sample(mu)},
              {"alpha_sample", p.alpha_sample()}};
  const PsiResult r = psi(mu, p.rho_tv, p.alpha_tv, p.Delta, p.delta, p.p_override);
  doc["p_star"] = r.p_star;
  doc["k_tv"] = r.k_tv;
  if (!r.feasible()) {
    emit(doc, f, out);
    throw Infeasible("no manifest-error mass keeps the retained margin; lower rho_tv or Delta");
  }
  const ManifestCertificate cert = make_certificate(r, p.delta, p.Delta, size);
  const double eta = eta_dup(r.p_star, p.delta, p.Delta);
  const PhiResult d = phi(eta, p.kappa_dup(mu), p.alpha_dup, cert.n_upper);
  doc["epsilon"] = cert.epsilon;
  doc["n_upper"] = cert.n_upper;
  doc["eta_dup"] = eta;
  doc["k_dup"] = d.k_dup;
  emit(doc, f, out);
  if (d.infeasible) throw Infeasible("duplicate detection needs more draws than ballots exist");
  return kExitOk;
}

int simulate(const Flags& f, std::ostream& out) {
  const json file = scenario_of(f);
  SimulationConfig c;
  c.margin = require(f.mu, file, "mu", "--mu");
  c.population = require(f.size, file, "population", "--size");
  c.seed = require(f.seed, file, "seed", "--seed");
  c.trials = pick(f.trials, file, "trials", c.trials);
  c.threads = pick(f.threads, file, "threads", c.threads);
  c.rates = rates_of(file);
  c.validate();
  const double alpha = pick(f.alpha, file, "alpha", 0.05);
  const double gamma = pick<double>(std::nullopt, file, "gamma", kDefaultGamma);
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("--alpha must lie in (0,1)");

  const KmQuantile q = km_percentile_size(c, c.margin, alpha, gamma);
  json doc = {{"mu", c.margin},
              {"size", c.population},
              {"alpha", alpha},
              {"trials", c.trials},
              {"seed", c.seed},
              {"km_zero_discrepancy", km_zero_discrepancy_size(c.margin, alpha, gamma)},
              {"km_quantile", {{"quantile", c.quantile}, {"size", q.size}, {"capped", q.capped}}},
              {"minerva", minerva_first_round(c.margin)},
              {"minerva_risk_scaled", minerva_first_round(c.margin, MinervaParams::risk_scaled(alpha))}};
  emit(doc, f, out);
  return q.capped ? kExitInfeasible : kExitOk;
}

json split_json(const BudgetSplit& b) {
  return {{"method", to_string(b.method)},
          {"mode", to_string(b.mode)},
          {"rho_tv", b.rho_tv},
          {"rho_dup", b.rho_dup},
          {"alpha_tv_frac", b.alpha_tv_frac},
          {"alpha_dup_frac", b.alpha_dup_frac},
          {"alpha_sample_frac", b.alpha_sample_frac()},
          {"p_star", b.p_star},
          {"k_tv", b.k_tv},
          {"k_S", b.k_S},
          {"k_dup", b.k_dup},
          {"k_Sample", b.k_Sample},
          {"mu_sample", b.mu_sample},
          {"alpha_sample", b.alpha_sample},
          {"pulls", b.pulls},
          {"dup_checks", b.dup_checks},
          {"interpretations", b.interpretations},
          {"headline_samples", b.headline_samples()},
          {"objective_value", b.objective_value}};
}

int optimize(const Flags& f, std::ostream& out) {
  const json file = scenario_of(f);
  OptimizeRequest r;
  r.margin = require(f.mu, file, "mu", "--mu");
  r.population = require(f.size, file, "population", "--size");
  const std::uint64_t seed = require(f.seed, file, "seed", "--seed");
  r.alpha = pick(f.alpha, file, "alpha", r.alpha);
  r.delta = pick(f.delta, file, "delta", r.delta);
  r.Delta = pick(f.Delta, file, "Delta", r.Delta);
  r.method = method_from_string(pick<std::string>(f.method, file, "method", "direct"));
  r.mode = manifest_mode_from_string(pick<std::string>(f.mode, file, "mode", "full"));
  r.objective = objective_from_string(pick<std::string>(f.objective, file, "objective", "max_samples"));
  r.minerva_risk_scaled = pick<std::string>(std::nullopt, file, "minerva", "printed") == "risk_scaled";
  r.rates = rates_of(file);
  r.validate();
  const std::int64_t trials = pick<std::int64_t>(f.trials, file, "trials", 1000);
  if (trials < 1) throw std::invalid_argument("--trials must be positive");
  KmSizeCache cache(trials, 0.90, seed, kDefaultGamma, pick(f.threads, file, "threads", 1));

  const std::optional<BudgetSplit> best = optimize_budget(r, cache);
  json doc = {{"mu", r.margin}, {"size", r.population}, {"alpha", r.alpha}, {"seed", seed}, {"trials", trials}};
  if (!best) {
    doc["split"] = nullptr;
    emit(doc, f, out);
    throw Infeasible("no split on the grid completes below the caps; escalate to a full hand count");
  }
  doc["split"] = split_json(*best);
  doc["hours"] = time_to_audit(*best, r.cost, races_for(r.objective), r.population);
  emit(doc, f, out);
  return kExitOk;
}

std::int64_t default_replication(AttackKind k) { return k == AttackKind::kPollingSizeSwap ? 1000 : 100; }

struct AttackReport {
  AttackFixture fixture;
  RiskEstimate naive;
  RiskEstimate full;
  double alpha = 0.05;

  bool naive_fooled() const { return naive.acceptance_rate >= 0.5; }
  bool full_sound() const { return full.acceptance_rate <= alpha + 3.0 * full.std_error; }
};

AttackReport run_attack(AttackKind kind, std::int64_t replication, const AuditParams& params, std::int64_t trials,
                        std::uint64_t seed, int threads) {
  AttackReport rep{make_attack(kind, replication), {}, {}, params.alpha};
  const Election& e = rep.fixture.election;
  const Manifest& coarse = rep.fixture.coarse;
  std::function<bool(Rng&)> naive;
  std::optional<RowSamplingComparison> rows;
  switch (kind) {
    case AttackKind::kPollingSizeSwap:
      naive = [&](Rng& rng) { return naive_polling_audit(e, params.alpha, rng); };
      break;
    case AttackKind::kComparisonElide:
      rows.emplace(e);
      naive = [&](Rng& rng) { return rows->audit(params.alpha, params.gamma, rng); };
      break;
    case AttackKind::kDirectPhantom:
      naive = [&](Rng& rng) { return naive_direct_audit(e, coarse, params.alpha, rng); };
      break;
  }
  rep.naive = estimate_risk(naive, trials, seed, threads);
  rep.full = estimate_risk([&](Rng& rng) { return full_direct_audit(e, coarse, params, rng); }, trials,
                           derive_seed(seed, 1), threads);
  return rep;
}

json report_json(const AttackReport& r) {
  auto est = [](const RiskEstimate& e) {
    return json{{"trials", e.trials}, {"accepted", e.accepted}, {"rate", e.acceptance_rate}, {"std_error", e.std_error}};
  };
  return {{"kind", to_string(r.fixture.kind)},
          {"replication", r.fixture.replication},
          {"ballots", r.fixture.election.actual_size()},
          {"rows", r.fixture.election.tabulation().total_size()},
          {"naive", est(r.naive)},
          {"full", est(r.full)},
          {"naive_fooled", r.naive_fooled()},
          {"full_within_risk", r.full_sound()}};
}

int attack_demo(const Flags& f, std::ostream& out) {
  const json file = scenario_of(f);
  const AttackKind kind = attack_kind_from_string(require(f.kind, file, "kind", "--kind"));
  const std::int64_t replication = pick(f.replication, file, "replication", default_replication(kind));
  const std::int64_t trials = pick<std::int64_t>(f.trials, file, "trials", 2000);
  const std::uint64_t seed = pick<std::uint64_t>(f.seed, file, "seed", 1);
  if (trials < 1) throw std::invalid_argument("--trials must be positive");
  const AuditParams params = audit_params(f, file);
  const AttackReport r = run_attack(kind, replication, params, trials, seed, pick(f.threads, file, "threads", 1));
  json doc = report_json(r);
  doc["seed"] = seed;
  doc["fixture"] = fixture_to_json(ElectionFixture{r.fixture.election, r.fixture.coarse});
  out << report_json(r).dump(2) << '\n';
  if (!f.out.empty()) {
    std::ofstream file_out(f.out);
    if (!file_out) throw std::invalid_argument("cannot write '" + f.out + "'");
    file_out << doc.dump(2) << '\n';
  }
  return kExitOk;
}

int risk_validate(const Flags& f, std::ostream& out) {
  const json file = scenario_of(f);
  const std::int64_t trials = pick<std::int64_t>(f.trials, file, "trials", 2000);
  const std::uint64_t seed = pick<std::uint64_t>(f.seed, file, "seed", 1);
  if (trials < 1) throw std::invalid_argument("--trials must be positive");
  const AuditParams params = audit_params(f, file);
  const int threads = pick(f.threads, file, "threads", 1);
  bool ok = true;
  for (AttackKind k : {AttackKind::kPollingSizeSwap, AttackKind::kComparisonElide, AttackKind::kDirectPhantom}) {
    const AttackReport r = run_attack(k, default_replication(k), params, trials, seed, threads);
    const bool pass = r.naive_fooled() && r.full_sound();
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << to_string(k) << " naive=" << r.naive.acceptance_rate
        << " full=" << r.full.acceptance_rate << " (se " << r.full.std_error << ")\n";
  }
  return ok ? kExitOk : kExitInfeasible;
}

int emit_tables_cmd(const Flags& f, std::ostream& out) {
  TableScenario s = f.scenario.empty() ? TableScenario::reference() : scenario_from_json(load_json(f.scenario));
  if (f.seed) s.seed = *f.seed;
  if (f.trials) s.trials = *f.trials;
  if (f.threads) s.threads = *f.threads;
  if (f.alpha) s.alpha = *f.alpha;
  if (f.delta) s.delta = *f.delta;
  if (f.Delta) s.Delta = *f.Delta;
  if (f.objective) s.sample_objective = objective_from_string(*f.objective);
  // Re-run the schema checks on the merged values.
  s = scenario_from_json(scenario_to_json(s));
  const auto tables = emit_tables(s);
  const std::string dir = f.out.empty() ? "." : f.out;
  write_tables(tables, dir);
  for (const auto& [name, t] : tables) out << dir << '/' << name << " (" << t.rows.size() << " rows)\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk-limiting audit calibration, simulation and table generation", "rla"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("--scenario", f.scenario, "JSON scenario file; flags override its values");
    sub->add_option("--out", f.out, "output file (JSON commands) or directory (emit-tables)");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--threads", f.threads, "worker cap; 0 = all cores")->check(CLI::NonNegativeNumber);
    sub->add_option("--mu", f.mu, "diluted margin as a fraction");
    sub->add_option("--size", f.size, "ballots cast");
    sub->add_option("--alpha", f.alpha, "risk limit");
    sub->add_option("--delta", f.delta, "typical batch-size accuracy");
    sub->add_option("--Delta", f.Delta, "worst-case batch-size accuracy");
    sub->add_option("--rho-tv", f.rho_tv);
    sub->add_option("--rho-dup", f.rho_dup);
    sub->add_option("--alpha-tv", f.alpha_tv);
    sub->add_option("--alpha-dup", f.alpha_dup);
    sub->add_option("--objective", f.objective, "max_samples, time_1_race or time_10_races");
    sub->add_option("--method", f.method, "direct, comparison or polling");
    sub->add_option("--mode", f.mode, "full or statistical manifest");
    sub->add_option("--trials", f.trials, "Monte-Carlo trials");
    sub->add_option("--kind", f.kind, "polling_size_swap, comparison_elide or direct_phantom");
    sub->add_option("--replication", f.replication, "copies of the attack's batch pair");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Flags&, std::ostream&);
  };
  const std::vector<Cmd> cmds = {
      {"calibrate", "print p*, k_tv, k_dup, mu_Sample, alpha_Sample", calibrate},
      {"simulate", "Kaplan-Markov percentile size and Minerva first round", simulate},
      {"optimize", "search the budget split grid", optimize},
      {"attack-demo", "naive versus full acceptance on an attack fixture", attack_demo},
      {"emit-tables", "write the CSV suite", emit_tables_cmd},
      {"risk-validate", "run the attack risk suite", risk_validate},
  };
  std::vector<CLI::App*> subs;
  for (const Cmd& c : cmds) {
    subs.push_back(app.add_subcommand(c.name, c.help));
    common(subs.back());
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "rla: " << e.what() << '\n';
    return kExitInputError;
  }
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      return cmds[i].fn(f, out);
    } catch (const Infeasible& e) {
      err << "rla " << cmds[i].name << ": infeasible: " << e.what() << '\n';
      return kExitInfeasible;
    } catch (const std::exception& e) {
      err << "rla " << cmds[i].name << ": input error: " << e.what() << '\n';
      return kExitInputError;
    }
  }
  return kExitInputError;
}

}  // namespace rla
