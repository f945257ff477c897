#pragma once

#include <stdexcept>
#include <string>

namespace predfilter {

/// Bad input: unreadable files, malformed records, violated preconditions.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values during inference or training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Edge and cloud state diverged in a mode that guarantees they cannot.
class SyncError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace predfilter
