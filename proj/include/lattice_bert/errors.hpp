#pragma once

#include <stdexcept>
#include <string>

namespace lattice_bert {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text was empty after normalization.
class EmptyInput : public Error {
 public:
  EmptyInput() : Error("empty input after normalization") {}
};

class InvalidSpan : public Error {
 public:
  using Error::Error;
};

// A character position does not fit the position-embedding tables.
class PositionOverflow : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (vocabulary, instances, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace lattice_bert
