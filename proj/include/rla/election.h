#ifndef RLA_ELECTION_H_
#define RLA_ELECTION_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rla {

// Discrepancy values live in {-2, ..., 2}.
constexpr int kMinDiscrepancy = -2;
constexpr int kMaxDiscrepancy = 2;

// Thrown when a tabulation cannot be trusted structurally (duplicate or empty
// identifiers, bad marks). The auditor must not proceed on such input.
class MalformedTabulation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A physical ballot. An empty identifier means the ballot is unlabeled.
// The batch a ballot belongs to is given by the container holding it.
struct Ballot {
  int w = 0;
  int l = 0;
  std::string id;

  bool labeled() const { return !id.empty(); }
  int net() const { return w - l; }
};

struct CvrRow {
  std::string id;
  int w = 0;
  int l = 0;

  int net() const { return w - l; }
};

using BallotBatch = std::vector<Ballot>;
using CvrBatch = std::vector<CvrRow>;

enum class ManifestRole { kCoarse, kTabulated, kActual };

struct Manifest {
  std::vector<std::int64_t> sizes;
  ManifestRole role = ManifestRole::kTabulated;

  std::size_t num_batches() const { return sizes.size(); }
  std::int64_t total() const;
};

struct RowRef {
  std::int32_t batch;
  std::int32_t row;
};

// Per-batch CVR rows plus a global identifier index. Immutable once built.
class Tabulation {
 public:
  Tabulation() = default;
  // Throws MalformedTabulation on empty or repeated identifiers, or marks
  // outside {0,1}.
  explicit Tabulation(std::vector<CvrBatch> batches);

  const std::vector<CvrBatch>& batches() const { return batches_; }
  std::size_t num_batches() const { return batches_.size(); }
  std::int64_t batch_size(std::size_t b) const { return static_cast<std::int64_t>(batches_[b].size()); }
  std::int64_t total_size() const { return size_; }
  std::int64_t winner_total() const { return winner_; }
  std::int64_t loser_total() const { return loser_; }
  Manifest manifest() const;

  // Row carrying `id`, or nullptr when absent. The empty identifier is never
  // present.
  const CvrRow* find(const std::string& id) const;
  const CvrRow& row(RowRef ref) const { return batches_[ref.batch][ref.row]; }

 private:
  std::vector<CvrBatch> batches_;
  std::unordered_map<std::string, RowRef> index_;
  std::int64_t size_ = 0;
  std::int64_t winner_ = 0;
  std::int64_t loser_ = 0;
};

struct Totals {
  std::int64_t s = 0;
  std::int64_t w = 0;
  std::int64_t l = 0;
  std::vector<std::int64_t> per_batch;
};

Totals tabulated_totals(const Tabulation& tab);

// (W - L) / S. Requires S > 0 and S >= W > L >= 0.
double diluted_margin(std::int64_t s, std::int64_t w, std::int64_t l);

// Mark difference between the CVR row carrying the ballot's identifier and
// the ballot itself. A missing or unlabeled identifier is scored against a
// row voting for the reported winner.
int ballot_discrepancy(const Ballot& ballot, const Tabulation& tab);

class Election {
 public:
  Election() = default;
  // Throws std::invalid_argument when the batch counts differ, marks are out
  // of range, or the tabulated margin is not in (0, 1].
  Election(std::vector<BallotBatch> ballots, Tabulation tabulation);

  const std::vector<BallotBatch>& batches() const { return ballots_; }
  const Tabulation& tabulation() const { return tab_; }
  std::size_t num_batches() const { return ballots_.size(); }

  Manifest actual_manifest() const;
  std::int64_t actual_size() const { return actual_size_; }
  std::int64_t actual_winner() const { return actual_winner_; }
  std::int64_t actual_loser() const { return actual_loser_; }

  double tabulated_margin() const;
  // May be zero or negative for invalid elections.
  double actual_margin() const;
  bool valid() const { return actual_winner_ > actual_loser_; }

 private:
  std::vector<BallotBatch> ballots_;
  Tabulation tab_;
  std::int64_t actual_size_ = 0;
  std::int64_t actual_winner_ = 0;
  std::int64_t actual_loser_ = 0;
};

// (W_tab - L_tab) - (W_act - L_act).
std::int64_t election_discrepancy(const Election& e);

// Fraction of ballots left unpaired after keeping one ballot per distinct
// nonempty identifier. Unlabeled ballots never pair, so each one counts.
double excess_multiplicity_rate(const std::vector<BallotBatch>& ballots);

// Hex codec used by the JSON fixtures. Identifiers are raw byte strings.
std::string to_hex(const std::string& bytes);
std::string from_hex(const std::string& hex);

// Fixed-width identifier for the n-th generated ballot.
std::string make_identifier(std::uint64_t n);

}  // namespace rla

#endif  // RLA_ELECTION_H_
