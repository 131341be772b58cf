#pragma once

#include <stdexcept>
#include <string>

namespace alsrec {

// Raised for malformed input, violated preconditions, and numeric failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace alsrec
