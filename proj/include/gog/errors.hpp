#pragma once

#include <stdexcept>

namespace gog {

// Contract violations raised by the pure computation modules.

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class IllegalIndex : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class GroupTooSmall : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MissingPassRate : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnlabeledRecords : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MissingLabel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace gog
