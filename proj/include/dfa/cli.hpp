#ifndef DFA_CLI_HPP
#define DFA_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dfa::cli {

/// Entry point behind the `dfa` executable. Returns the process exit code:
/// 0 on completion, 1 on I/O or format errors, 2 on usage or configuration
/// errors. Diagnostics go to `err`; informational output to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses a comma-separated list of integers ("5,10,15").
std::vector<long long> parse_int_list(const std::string& text);

}  // namespace dfa::cli

#endif  // DFA_CLI_HPP
