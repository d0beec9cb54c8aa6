#pragma once

#include <stdexcept>
#include <string>

namespace glossalign {

enum class Err {
  // numerics / model
  ZeroRow,
  DimMismatch,
  DegenerateSpread,
  SpanOutOfRange,
  // losses
  BatchTooSmall,
  NonFiniteInput,
  NonFiniteLoss,
  // optim
  NonFiniteGradient,
  // data
  ParseError,
  DanglingGloss,
  MissingEmbedding,
  DatasetTooSmall,
  ConfigInvalid,
  BadMagic,
  TruncatedFile,
  DuplicateId,
  // eval
  EmptyCandidates,
  LengthMismatch,
  EmptyRelevantSet,
  DegenerateRanks,
  NoPositives,
  UnknownWord,
  // cli
  IoError,
  UsageError,
};

const char* err_name(Err code);

// True for errors that map to CLI exit code 2 (file-level failures);
// everything else is a validation error (exit code 1).
bool is_io_error(Err code);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& message)
      : std::runtime_error(std::string(err_name(code)) + ": " + message), code_(code) {}

  Err code() const { return code_; }

 private:
  Err code_;
};

}  // namespace glossalign
