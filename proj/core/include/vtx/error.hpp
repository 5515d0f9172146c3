#pragma once

#include <stdexcept>
#include <string>

namespace vtx {

enum class ErrorKind {
  OddGrid,
  Mismatch,
  NearBranchCut,
  DegenerateSpectrum,
  NonPositiveMetric,
  NonZeroMean,
  MissingField,
  ConstraintViolation,
  NonIntegrableFrame,
  ParityError,
  NonPositiveSigma,
  CorruptCheckpoint,
  InvalidConfig,
  Unsupported,
  Io,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + msg), kind(kind) {}
  ErrorKind kind;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

} // namespace vtx
