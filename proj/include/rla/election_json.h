#ifndef RLA_ELECTION_JSON_H_
#define RLA_ELECTION_JSON_H_

#include <optional>
#include <string>

#include "json.hpp"
#include "rla/election.h"

namespace rla {

// Fixture format:
//   {"batches": [{"ballots": [{"w": 0|1, "l": 0|1, "id": "<hex or empty>"}]}],
//    "cvr": [[{"id": "<hex>", "w": 0|1, "l": 0|1}]],
//    "coarse": [sizes...]}            (optional)
struct ElectionFixture {
  Election election;
  std::optional<Manifest> coarse;
};

nlohmann::json fixture_to_json(const ElectionFixture& fixture);
// Throws std::invalid_argument (or MalformedTabulation) on schema errors.
ElectionFixture fixture_from_json(const nlohmann::json& j);

ElectionFixture load_fixture(const std::string& path);
void save_fixture(const ElectionFixture& fixture, const std::string& path);

}  // namespace rla

#endif  // RLA_ELECTION_JSON_H_
