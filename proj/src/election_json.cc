#include "rla/election_json.h"

#include <fstream>
#include <stdexcept>

namespace rla {

using nlohmann::json;

namespace {

int read_mark(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing mark '") + key + "'");
  const int v = j.at(key).get<int>();
  if (v != 0 && v != 1) throw std::invalid_argument(std::string("mark '") + key + "' must be 0 or 1");
  return v;
}

}  // namespace

json fixture_to_json(const ElectionFixture& fixture) {
  const Election& e = fixture.election;
  json batches = json::array();
  for (const auto& batch : e.batches()) {
    json ballots = json::array();
    for (const auto& b : batch) ballots.push_back({{"w", b.w}, {"l", b.l}, {"id", to_hex(b.id)}});
    batches.push_back({{"ballots", std::move(ballots)}});
  }
  json cvr = json::array();
  for (const auto& batch : e.tabulation().batches()) {
    json rows = json::array();
    for (const auto& r : batch) rows.push_back({{"id", to_hex(r.id)}, {"w", r.w}, {"l", r.l}});
    cvr.push_back(std::move(rows));
  }
  json out = {{"batches", std::move(batches)}, {"cvr", std::move(cvr)}};
  if (fixture.coarse) out["coarse"] = fixture.coarse->sizes;
  return out;
}

ElectionFixture fixture_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("batches") || !j.contains("cvr")) {
      throw std::invalid_argument("election fixture needs 'batches' and 'cvr'");
    }
    std::vector<BallotBatch> ballots;
    for (const auto& jb : j.at("batches")) {
      BallotBatch batch;
      for (const auto& x : jb.at("ballots")) {
        batch.push_back(Ballot{read_mark(x, "w"), read_mark(x, "l"), from_hex(x.value("id", std::string()))});
      }
      ballots.push_back(std::move(batch));
    }
    std::vector<CvrBatch> cvr;
    for (const auto& jb : j.at("cvr")) {
      CvrBatch batch;
      for (const auto& x : jb) batch.push_back(CvrRow{from_hex(x.at("id").get<std::string>()), read_mark(x, "w"), read_mark(x, "l")});
      cvr.push_back(std::move(batch));
    }
    ElectionFixture f{Election(std::move(ballots), Tabulation(std::move(cvr))), std::nullopt};
    if (j.contains("coarse")) {
      Manifest m{j.at("coarse").get<std::vector<std::int64_t>>(), ManifestRole::kCoarse};
      if (m.num_batches() != f.election.num_batches()) throw std::invalid_argument("coarse manifest length mismatch");
      for (auto s : m.sizes) {
        if (s < 0) throw std::invalid_argument("negative coarse batch size");
      }
      f.coarse = std::move(m);
    }
    return f;
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("election fixture: ") + ex.what());
  }
}

ElectionFixture load_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw std::invalid_argument(path + ": " + ex.what());
  }
  return fixture_from_json(j);
}

void save_fixture(const ElectionFixture& fixture, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << fixture_to_json(fixture).dump() << '\n';
}

}  // namespace rla
