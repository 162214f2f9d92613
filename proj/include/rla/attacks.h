#ifndef RLA_ATTACKS_H_
#define RLA_ATTACKS_H_

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>

#include "rla/audit.h"
#include "rla/election.h"
#include "rla/rng.h"

namespace rla {

// Manifest-manipulation attacks on a two-batch election whose true outcome is
// 49 votes for the reported winner against 51 for the reported loser. Each
// fixture is replicated `replication` times (2 * replication batches).
//
//   kPollingSizeSwap:  the 49 winner ballots are declared as 51 rows (two
//                      phantom rows), the 51 loser ballots as 49 rows (two
//                      ballots left out of the CVR).
//   kComparisonElide:  the loser batch of 51 is declared as 47 rows; the four
//                      omitted ballots never appear in any CVR row.
//   kDirectPhantom:    batch sizes are honest, but two pairs of loser ballots
//                      share an identifier; the two freed rows become phantom
//                      winner rows that no ballot carries. Only duplicate
//                      detection can see this.
enum class AttackKind { kPollingSizeSwap, kComparisonElide, kDirectPhantom };

const char* to_string(AttackKind k);
// Accepts "polling_size_swap", "comparison_elide", "direct_phantom".
AttackKind attack_kind_from_string(const std::string& s);

struct AttackFixture {
  AttackKind kind;
  std::int64_t replication = 1;
  Election election;
  Manifest coarse;  // Delta-accurate for Delta = 0.1 and passes the coarse check
  Manifest tab;
};

AttackFixture make_attack(AttackKind kind, std::int64_t replication = 1);

// Auditors that trust the tabulated manifest. Each returns true on accept.

// Ballot polling: batch by tabulated size, uniform ballot, BRAVO with the
// reported winner share.
bool naive_polling_audit(const Election& e, double alpha, Rng& rng);

// Ballot comparison driven by CVR rows: a uniform row is drawn and the ballot
// carrying its identifier is retrieved. A row with no ballot scores 2.
class RowSamplingComparison {
 public:
  explicit RowSamplingComparison(const Election& e);
  bool audit(double alpha, double gamma, Rng& rng) const;

 private:
  const Election* e_;
  std::unordered_map<std::string, const Ballot*> by_id_;
};

// Direct selection with both certification stages switched off.
bool naive_direct_audit(const Election& e, const Manifest& coarse, double alpha, Rng& rng);

// The complete auditor with the given parameters.
bool full_direct_audit(const Election& e, const Manifest& coarse, const AuditParams& params, Rng& rng);

}  // namespace rla

#endif  // RLA_ATTACKS_H_
