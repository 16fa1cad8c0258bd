#pragma once

#include <stdexcept>
#include <string>

namespace selfdesc {

// Malformed or inconsistent input data. The CLI maps this to exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's documented precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace selfdesc
