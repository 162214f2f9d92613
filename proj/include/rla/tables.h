#ifndef RLA_TABLES_H_
#define RLA_TABLES_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rla/efficiency.h"

namespace rla {

// Minimal CSV document: comma separated, LF line ends, no quoting (no field
// produced here contains a comma).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
  // Throws std::invalid_argument on ragged rows or an empty document.
  static CsvTable parse(const std::string& text);
};

struct TableScenario {
  std::vector<std::pair<std::string, std::int64_t>> states;  // display name, ballots cast
  std::vector<double> ratio_margins;                          // fractions
  std::vector<double> main_margins;
  double alpha = 0.05;
  double delta = 0.001;
  double Delta = 0.1;
  DiscrepancyRates rates;
  std::int64_t trials = 1000;
  double quantile = 0.90;
  std::uint64_t seed = 1;
  int threads = 1;
  double gamma = kDefaultGamma;
  Objective sample_objective = Objective::kMaxSamples;  // main results tables
  Objective ratio_objective = Objective::kTime1Race;    // ratio and savings tables
  bool minerva_risk_scaled = false;
  std::string comparison_state = "California";
  OptimizerGrid grid = OptimizerGrid::defaults();
  CostModel cost;

  // The six populations and margin grids of the published comparison.
  static TableScenario reference();
};

// Reads the scenario format documented in README.md; unspecified fields keep
// the reference() defaults. A single-population file
// ({"population": S, "margins": [...]}) yields one state named "Scenario".
// Throws std::invalid_argument on schema errors.
TableScenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const TableScenario& s);

// File name -> document for the whole CSV suite.
std::map<std::string, CsvTable> emit_tables(const TableScenario& s);
void write_tables(const std::map<std::string, CsvTable>& tables, const std::string& dir);

// Margins are printed as percentages with two decimals.
std::string format_margin(double fraction);

}  // namespace rla

#endif  // RLA_TABLES_H_
