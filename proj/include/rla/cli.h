#ifndef RLA_CLI_H_
#define RLA_CLI_H_

#include <iosfwd>

namespace rla {

// Exit codes of run_cli.
constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitInputError = 2;

// Entry point of the rla command-line tool. Results go to `out`,
// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rla

#endif  // RLA_CLI_H_
