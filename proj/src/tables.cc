#include "rla/tables.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rla {

using nlohmann::json;

std::string CsvTable::to_string() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

CsvTable CsvTable::parse(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw std::invalid_argument("csv: ragged row '" + line + "'");
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::invalid_argument("csv: empty document");
  return t;
}

TableScenario TableScenario::reference() {
  TableScenario s;
  s.states = {{"Cong", 456000},       {"1M", 1000000},      {"Connecticut", 1680000},
              {"Georgia", 5008000},   {"Florida", 7964000}, {"California", 16141000}};
  s.ratio_margins = {0.005, 0.01, 0.02, 0.03, 0.05, 0.08, 0.10};
  s.main_margins = {0.005, 0.0075, 0.01, 0.015, 0.02, 0.025, 0.03};
  return s;
}

namespace {

std::vector<double> percent_list(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(x.get<double>() / 100.0);
  return out;
}

json percent_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x * 100.0);
  return out;
}

}  // namespace

// Margins in scenario files are percentages, as in the published tables.
TableScenario scenario_from_json(const json& j) {
  try {
    if (!j.is_object()) throw std::invalid_argument("scenario must be a JSON object");
    TableScenario s = TableScenario::reference();
    if (j.contains("states")) {
      s.states.clear();
      for (const auto& st : j.at("states")) {
        s.states.emplace_back(st.at("name").get<std::string>(), st.at("population").get<std::int64_t>());
      }
    } else if (j.contains("population")) {
      s.states = {{"Scenario", j.at("population").get<std::int64_t>()}};
    }
    if (j.contains("margins")) s.ratio_margins = s.main_margins = percent_list(j.at("margins"));
    if (j.contains("ratio_margins")) s.ratio_margins = percent_list(j.at("ratio_margins"));
    if (j.contains("main_margins")) s.main_margins = percent_list(j.at("main_margins"));
    s.alpha = j.value("alpha", s.alpha);
    s.delta = j.value("delta", s.delta);
    s.Delta = j.value("Delta", s.Delta);
    s.trials = j.value("trials", s.trials);
    s.quantile = j.value("quantile", s.quantile);
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    s.threads = j.value("threads", s.threads);
    s.gamma = j.value("gamma", s.gamma);
    if (j.contains("objective")) s.sample_objective = objective_from_string(j.at("objective").get<std::string>());
    if (j.contains("ratio_objective")) {
      s.ratio_objective = objective_from_string(j.at("ratio_objective").get<std::string>());
    }
    if (j.contains("minerva")) {
      const std::string m = j.at("minerva").get<std::string>();
      if (m != "printed" && m != "risk_scaled") throw std::invalid_argument("minerva must be printed or risk_scaled");
      s.minerva_risk_scaled = m == "risk_scaled";
    }
    s.comparison_state = j.value("comparison_state", s.comparison_state);
    if (j.contains("rates")) {
      const json& r = j.at("rates");
      s.rates = DiscrepancyRates{r.value("o1", s.rates.o1), r.value("u1", s.rates.u1), r.value("o2", s.rates.o2),
                                 r.value("u2", s.rates.u2)};
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      if (g.contains("rho")) s.grid.rho = g.at("rho").get<std::vector<double>>();
      if (g.contains("alpha_frac")) s.grid.alpha_frac = g.at("alpha_frac").get<std::vector<double>>();
    }
    if (j.contains("cost")) {
      const json& c = j.at("cost");
      s.cost.pull_seconds = c.value("pull_seconds", s.cost.pull_seconds);
      s.cost.dup_check_seconds = c.value("dup_check_seconds", s.cost.dup_check_seconds);
      s.cost.interpret_seconds_per_race = c.value("interpret_seconds_per_race", s.cost.interpret_seconds_per_race);
      s.cost.manifest_rate = c.value("manifest_rate", s.cost.manifest_rate);
      s.cost.avg_batch = c.value("avg_batch", s.cost.avg_batch);
    }
    s.rates.validate();
    s.cost.validate();
    if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (!(s.delta >= 0.0 && s.delta <= s.Delta)) throw std::invalid_argument("need 0 <= delta <= Delta");
    if (s.trials < 1) throw std::invalid_argument("trials must be positive");
    if (!(s.quantile > 0.0 && s.quantile < 1.0)) throw std::invalid_argument("quantile must lie in (0,1)");
    for (const auto* list : {&s.ratio_margins, &s.main_margins}) {
      for (double m : *list) {
        if (!(m > 0.0 && m < 1.0)) throw std::invalid_argument("margins must lie strictly between 0 and 100 percent");
      }
    }
    for (const auto* list : {&s.grid.rho, &s.grid.alpha_frac}) {
      if (list->empty()) throw std::invalid_argument("grid lists must be nonempty");
      for (double x : *list) {
        if (!(x > 0.0 && x < 1.0)) throw std::invalid_argument("grid fractions must lie in (0,1)");
      }
    }
    for (const auto& [name, pop] : s.states) {
      if (pop < 1) throw std::invalid_argument("population of " + name + " must be positive");
    }
    return s;
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("scenario: ") + ex.what());
  }
}

json scenario_to_json(const TableScenario& s) {
  json states = json::array();
  for (const auto& [name, pop] : s.states) states.push_back({{"name", name}, {"population", pop}});
  return {{"states", states},
          {"ratio_margins", percent_json(s.ratio_margins)},
          {"main_margins", percent_json(s.main_margins)},
          {"alpha", s.alpha},
          {"delta", s.delta},
          {"Delta", s.Delta},
          {"rates", {{"o1", s.rates.o1}, {"u1", s.rates.u1}, {"o2", s.rates.o2}, {"u2", s.rates.u2}}},
          {"trials", s.trials},
          {"quantile", s.quantile},
          {"seed", s.seed},
          {"gamma", s.gamma},
          {"objective", to_string(s.sample_objective)},
          {"ratio_objective", to_string(s.ratio_objective)},
          {"minerva", s.minerva_risk_scaled ? "risk_scaled" : "printed"},
          {"comparison_state", s.comparison_state},
          {"grid", {{"rho", s.grid.rho}, {"alpha_frac", s.grid.alpha_frac}}},
          {"cost",
           {{"pull_seconds", s.cost.pull_seconds},
            {"dup_check_seconds", s.cost.dup_check_seconds},
            {"interpret_seconds_per_race", s.cost.interpret_seconds_per_race},
            {"manifest_rate", s.cost.manifest_rate},
            {"avg_batch", s.cost.avg_batch}}}};
}

std::string format_margin(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

namespace {

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string num(std::int64_t x) { return std::to_string(x); }

std::string pct(double frac) { return num(static_cast<std::int64_t>(std::llround(frac * 100.0))); }

class Emitter {
 public:
  explicit Emitter(const TableScenario& s) : s_(s), cache_(s.trials, s.quantile, s.seed, s.gamma, s.threads) {}

  OptimizeRequest request(std::int64_t pop, double margin, Method m, Objective o) const {
    OptimizeRequest r;
    r.population = pop;
    r.margin = margin;
    r.alpha = s_.alpha;
    r.delta = s_.delta;
    r.Delta = s_.Delta;
    r.method = m;
    r.objective = o;
    r.grid = s_.grid;
    r.rates = s_.rates;
    r.cost = s_.cost;
    r.minerva_risk_scaled = s_.minerva_risk_scaled;
    return r;
  }

  const PlanComparison& plans(std::int64_t pop, double margin, Method m) {
    const auto key = std::make_tuple(pop, std::llround(margin * 1e9), static_cast<int>(m));
    auto it = plans_.find(key);
    if (it == plans_.end()) it = plans_.emplace(key, compare_plans(request(pop, margin, m, s_.ratio_objective), cache_)).first;
    return it->second;
  }

  std::optional<BudgetSplit> samples(std::int64_t pop, double margin) {
    return optimize_budget(request(pop, margin, Method::kDirect, s_.sample_objective), cache_);
  }

  std::int64_t minerva(std::int64_t pop, double margin) const {
    const MinervaParams p = s_.minerva_risk_scaled ? MinervaParams::risk_scaled(s_.alpha) : MinervaParams{};
    return std::min(pop, minerva_first_round(margin, p));
  }

 private:
  const TableScenario& s_;
  KmSizeCache cache_;
  std::map<std::tuple<std::int64_t, long long, int>, PlanComparison> plans_;
};

const std::pair<std::string, std::int64_t>* find_state(const TableScenario& s, const std::string& name) {
  for (const auto& st : s.states) {
    if (st.first == name) return &st;
  }
  return nullptr;
}

}  // namespace

std::map<std::string, CsvTable> emit_tables(const TableScenario& s) {
  Emitter em(s);
  std::map<std::string, CsvTable> out;
  const std::vector<std::string> ratio_states = {"California", "Florida", "Georgia", "Connecticut"};

  for (Method m : {Method::kComparison, Method::kDirect, Method::kPolling}) {
    CsvTable t;
    t.header = {"Margin"};
    t.header.insert(t.header.end(), ratio_states.begin(), ratio_states.end());
    if (!s.states.empty()) {
      for (double margin : s.ratio_margins) {
        std::vector<std::string> row = {format_margin(margin)};
        for (const auto& name : ratio_states) {
          const auto* st = find_state(s, name);
          row.push_back(st ? fixed(em.plans(st->second, margin, m).ratio(), 3) : "");
        }
        t.rows.push_back(std::move(row));
      }
    }
    out[std::string("time_results_by_size") + to_string(m) + ".csv"] = std::move(t);
  }

  CsvTable inacc;
  inacc.header = {"N",          "Margin",         "acc_k_dup",   "acc_k_Sample", "acc_k_S",
                  "inacc_k_dup", "inacc_k_Sample", "inacc_k_S"};
  for (const auto& [name, pop] : s.states) {
    for (double margin : s.ratio_margins) {
      const PlanComparison& pc = em.plans(pop, margin, Method::kDirect);
      auto cells = [&](const std::optional<BudgetSplit>& b) -> std::vector<std::string> {
        if (!b) return {"", "", num(pop)};
        return {num(b->k_dup), num(b->k_Sample), num(b->k_S)};
      };
      std::vector<std::string> row = {name, format_margin(margin)};
      for (auto& c : cells(pc.full)) row.push_back(c);
      for (auto& c : cells(pc.statistical)) row.push_back(c);
      inacc.rows.push_back(std::move(row));
    }
  }
  out["inacc_direct_savings.csv"] = std::move(inacc);

  CsvTable comp;
  comp.header = {"Method", "Margin", "acc_k_Sample", "acc_k_S", "inacc_k_Sample", "inacc_k_S"};
  if (const auto* st = find_state(s, s.comparison_state)) {
    for (Method m : {Method::kComparison, Method::kPolling}) {
      for (double margin : s.ratio_margins) {
        const PlanComparison& pc = em.plans(st->second, margin, m);
        auto pair = [&](const std::optional<BudgetSplit>& b) -> std::vector<std::string> {
          if (!b) return {num(st->second), num(st->second)};
          return {num(b->k_Sample), num(b->k_S)};
        };
        std::vector<std::string> row = {to_string(m), format_margin(margin)};
        for (auto& c : pair(pc.full)) row.push_back(c);
        for (auto& c : pair(pc.statistical)) row.push_back(c);
        comp.rows.push_back(std::move(row));
      }
    }
  }
  out["comp_inacc_savings.csv"] = std::move(comp);

  CsvTable raw, per_batch;
  raw.header = per_batch.header = {"State", "Margin", "k_dup", "alpha_dup", "k_Sample", "alpha_Sample", "Minerva"};
  for (const auto& [name, pop] : s.states) {
    const std::int64_t batches = (pop + s.cost.avg_batch - 1) / s.cost.avg_batch;
    auto per = [&](std::int64_t k) { return num(static_cast<std::int64_t>(std::llround(static_cast<double>(k) / batches))); };
    for (double margin : s.main_margins) {
      const std::optional<BudgetSplit> b = em.samples(pop, margin);
      const std::int64_t mv = em.minerva(pop, margin);
      if (!b) {
        raw.rows.push_back({name, format_margin(margin), "", "", "", "", num(mv)});
        per_batch.rows.push_back({name, format_margin(margin), "", "", "", "", per(mv)});
        continue;
      }
      // Risk shares normalized to the part of alpha these two stages use.
      const double used = b->alpha_dup_frac + b->alpha_sample_frac();
      const std::string a_dup = pct(b->alpha_dup_frac / used), a_s = pct(b->alpha_sample_frac() / used);
      raw.rows.push_back({name, format_margin(margin), num(b->k_dup), a_dup, num(b->k_Sample), a_s, num(mv)});
      per_batch.rows.push_back({name, format_margin(margin), per(b->k_dup), a_dup, per(b->k_Sample), a_s, per(mv)});
    }
  }
  out["main_results_raw_ballots.csv"] = std::move(raw);
  out["main_results.csv"] = std::move(per_batch);
  return out;
}

void write_tables(const std::map<std::string, CsvTable>& tables, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, t] : tables) {
    const std::filesystem::path path = std::filesystem::path(dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << t.to_string();
  }
}

}  // namespace rla
