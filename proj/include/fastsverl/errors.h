#ifndef FASTSVERL_ERRORS_H_
#define FASTSVERL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fastsverl {

// Invalid or unsupported configuration (bad parameters, budgets exceeded).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or non-finite data (NaN losses, zero behaviour probabilities,
// unreadable files, singular systems).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FASTSVERL_REQUIRE(cond, msg)                                  \
  do {                                                                \
    if (!(cond)) throw ::fastsverl::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace fastsverl

#endif  // FASTSVERL_ERRORS_H_
