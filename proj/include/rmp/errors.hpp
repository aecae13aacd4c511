#ifndef RMP_ERRORS_HPP_
#define RMP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace rmp {

// Error categories map to CLI exit codes: config=2, data=3, numeric=4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Shape mismatches, out-of-range labels and similar contract violations.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

#define RMP_CHECK(cond, msg)                      \
  do {                                            \
    if (!(cond)) throw ::rmp::ContractError(msg); \
  } while (0)

}  // namespace rmp

#endif  // RMP_ERRORS_HPP_
