#pragma once

#include <stdexcept>
#include <string>

namespace wmlab {

// Bad parameters, configs or thresholds. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data that cannot be processed (empty corpus, unscorable text,
// missing reference tables, split leakage). The CLI maps this to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wmlab
