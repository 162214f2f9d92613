#include "rla/election.h"

#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace rla {
namespace {

bool is_mark(int v) { return v == 0 || v == 1; }

}  // namespace

std::int64_t Manifest::total() const { return std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}); }

Tabulation::Tabulation(std::vector<CvrBatch> batches) : batches_(std::move(batches)) {
  std::size_t rows = 0;
  for (const auto& b : batches_) rows += b.size();
  index_.reserve(rows);
  for (std::size_t b = 0; b < batches_.size(); ++b) {
    for (std::size_t r = 0; r < batches_[b].size(); ++r) {
      const CvrRow& row = batches_[b][r];
      if (row.id.empty()) throw MalformedTabulation("CVR row without identifier in batch " + std::to_string(b));
      if (!is_mark(row.w) || !is_mark(row.l)) {
        throw MalformedTabulation("CVR marks must be 0 or 1 (row " + to_hex(row.id) + ")");
      }
      auto [it, inserted] = index_.emplace(row.id, RowRef{static_cast<std::int32_t>(b), static_cast<std::int32_t>(r)});
      if (!inserted) throw MalformedTabulation("duplicate CVR identifier " + to_hex(row.id));
      ++size_;
      winner_ += row.w;
      loser_ += row.l;
    }
  }
}

Manifest Tabulation::manifest() const {
  Manifest m;
  m.role = ManifestRole::kTabulated;
  m.sizes.reserve(batches_.size());
  for (const auto& b : batches_) m.sizes.push_back(static_cast<std::int64_t>(b.size()));
  return m;
}

const CvrRow* Tabulation::find(const std::string& id) const {
  if (id.empty()) return nullptr;
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &row(it->second);
}

Totals tabulated_totals(const Tabulation& tab) {
  Totals t;
  t.s = tab.total_size();
  t.w = tab.winner_total();
  t.l = tab.loser_total();
  t.per_batch = tab.manifest().sizes;
  return t;
}

double diluted_margin(std::int64_t s, std::int64_t w, std::int64_t l) {
  if (s <= 0) throw std::domain_error("diluted margin undefined for an empty tabulation");
  if (!(s >= w && w > l && l >= 0)) {
    throw std::invalid_argument("diluted margin requires S >= W > L >= 0");
  }
  return static_cast<double>(w - l) / static_cast<double>(s);
}

int ballot_discrepancy(const Ballot& ballot, const Tabulation& tab) {
  const CvrRow* row = tab.find(ballot.id);
  const int cvr_net = row ? row->net() : 1;
  return cvr_net - ballot.net();
}

Election::Election(std::vector<BallotBatch> ballots, Tabulation tabulation)
    : ballots_(std::move(ballots)), tab_(std::move(tabulation)) {
  if (ballots_.size() != tab_.num_batches()) {
    throw std::invalid_argument("ballot batches (" + std::to_string(ballots_.size()) +
                                ") and CVR batches (" + std::to_string(tab_.num_batches()) + ") differ");
  }
  for (const auto& batch : ballots_) {
    for (const auto& b : batch) {
      if (!is_mark(b.w) || !is_mark(b.l)) throw std::invalid_argument("ballot marks must be 0 or 1");
      ++actual_size_;
      actual_winner_ += b.w;
      actual_loser_ += b.l;
    }
  }
  // Validates the tabulated margin.
  (void)tabulated_margin();
}

Manifest Election::actual_manifest() const {
  Manifest m;
  m.role = ManifestRole::kActual;
  for (const auto& b : ballots_) m.sizes.push_back(static_cast<std::int64_t>(b.size()));
  return m;
}

double Election::tabulated_margin() const {
  return diluted_margin(tab_.total_size(), tab_.winner_total(), tab_.loser_total());
}

double Election::actual_margin() const {
  if (actual_size_ == 0) return 0.0;
  return static_cast<double>(actual_winner_ - actual_loser_) / static_cast<double>(actual_size_);
}

std::int64_t election_discrepancy(const Election& e) {
  const Tabulation& t = e.tabulation();
  return (t.winner_total() - t.loser_total()) - (e.actual_winner() - e.actual_loser());
}

double excess_multiplicity_rate(const std::vector<BallotBatch>& ballots) {
  std::unordered_set<std::string> distinct;
  std::int64_t total = 0;
  for (const auto& batch : ballots) {
    for (const auto& b : batch) {
      ++total;
      if (b.labeled()) distinct.insert(b.id);
    }
  }
  if (total == 0) throw std::invalid_argument("excess multiplicity rate of an empty ballot family");
  return static_cast<double>(total - static_cast<std::int64_t>(distinct.size())) / static_cast<double>(total);
}

std::string to_hex(const std::string& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

std::string from_hex(const std::string& hex) {
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex identifier: " + hex);
  };
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex identifier: " + hex);
  std::string out(hex.size() / 2, '\0');
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<char>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  return out;
}

std::string make_identifier(std::uint64_t n) {
  std::string id(8, '\0');
  for (int i = 7; i >= 0; --i) {
    id[i] = static_cast<char>(n & 0xff);
    n >>= 8;
  }
  return id;
}

}  // namespace rla
