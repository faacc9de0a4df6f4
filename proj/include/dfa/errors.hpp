#ifndef DFA_ERRORS_HPP
#define DFA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dfa {

// Shape mismatches and violated preconditions are reported with
// std::invalid_argument. The two types below cover the remaining cases.

/// Missing or inconsistent configuration (scheme parameters, attack knobs,
/// malformed network definitions).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents. Messages carry the path and a byte offset or
/// line number where one is known.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dfa

#endif  // DFA_ERRORS_HPP
