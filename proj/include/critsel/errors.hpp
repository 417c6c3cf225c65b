#ifndef CRITSEL_ERRORS_HPP
#define CRITSEL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace critsel {

// Raised for malformed or contract-violating inputs (bad files, foreign ids,
// out-of-range values). The CLI maps this to exit code 2; anything else that
// escapes is an internal error and maps to exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace critsel

#endif  // CRITSEL_ERRORS_HPP
