#pragma once

#include <stdexcept>
#include <string>

namespace fedtier {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/parameter shape or layout disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Precondition on an argument value violated (empty dataset, bad label, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

enum class IdxErrc { kIo, kBadMagic, kTruncated, kCountMismatch, kBadDimensions };

class IdxError : public Error {
 public:
  IdxError(IdxErrc code, const std::string& what) : Error(what), code_(code) {}
  IdxErrc code() const noexcept { return code_; }

 private:
  IdxErrc code_;
};

/// Partitioning asked for more samples than the source set holds.
class PartitionError : public Error {
 public:
  using Error::Error;
};

enum class CodecErrc { kVersionMismatch, kTruncated, kShapeMismatch, kMalformed };

class CodecError : public Error {
 public:
  CodecError(CodecErrc code, const std::string& what) : Error(what), code_(code) {}
  CodecErrc code() const noexcept { return code_; }

 private:
  CodecErrc code_;
};

enum class AggregationErrc { kEmpty, kLayoutMismatch, kNonPositiveWeight };

class AggregationError : public Error {
 public:
  AggregationError(AggregationErrc code, const std::string& what)
      : Error(what), code_(code) {}
  AggregationErrc code() const noexcept { return code_; }

 private:
  AggregationErrc code_;
};

/// Client/edge/fedge disagreement (unknown model id, unreachable tier).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration rejected.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedtier
