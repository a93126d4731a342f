#ifndef DEEPSPACE_ERRORS_HPP
#define DEEPSPACE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace deepspace {

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// geo
class NonPositiveDuration : public Error {
 public:
  using Error::Error;
};

// ingest
class MissingHeader : public Error {
 public:
  using Error::Error;
};

// encode
class EmptyInput : public Error {
 public:
  using Error::Error;
};
class UnknownStation : public Error {
 public:
  using Error::Error;
};

// nn
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class LabelOutOfRange : public Error {
 public:
  using Error::Error;
};

// hier
class EmptyIndex : public Error {
 public:
  using Error::Error;
};
class UnknownCoarseLabel : public Error {
 public:
  using Error::Error;
};
class CorruptFile : public Error {
 public:
  using Error::Error;
};
class VersionMismatch : public Error {
 public:
  using Error::Error;
};

// synth
class BoxTooSmall : public Error {
 public:
  using Error::Error;
};

// eval
class EmptyTestSet : public Error {
 public:
  using Error::Error;
};
class SequenceTooShort : public Error {
 public:
  using Error::Error;
};

}  // namespace deepspace

#endif  // DEEPSPACE_ERRORS_HPP
