#include "glossalign/error.hpp"

namespace glossalign {

const char* err_name(Err code) {
  switch (code) {
    case Err::ZeroRow: return "ZeroRow";
    case Err::DimMismatch: return "DimMismatch";
    case Err::DegenerateSpread: return "DegenerateSpread";
    case Err::SpanOutOfRange: return "SpanOutOfRange";
    case Err::BatchTooSmall: return "BatchTooSmall";
    case Err::NonFiniteInput: return "NonFiniteInput";
    case Err::NonFiniteLoss: return "NonFiniteLoss";
    case Err::NonFiniteGradient: return "NonFiniteGradient";
    case Err::ParseError: return "ParseError";
    case Err::DanglingGloss: return "DanglingGloss";
    case Err::MissingEmbedding: return "MissingEmbedding";
    case Err::DatasetTooSmall: return "DatasetTooSmall";
    case Err::ConfigInvalid: return "ConfigInvalid";
    case Err::BadMagic: return "BadMagic";
    case Err::TruncatedFile: return "TruncatedFile";
    case Err::DuplicateId: return "DuplicateId";
    case Err::EmptyCandidates: return "EmptyCandidates";
    case Err::LengthMismatch: return "LengthMismatch";
    case Err::EmptyRelevantSet: return "EmptyRelevantSet";
    case Err::DegenerateRanks: return "DegenerateRanks";
    case Err::NoPositives: return "NoPositives";
    case Err::UnknownWord: return "UnknownWord";
    case Err::IoError: return "IoError";
    case Err::UsageError: return "UsageError";
  }
  return "UnknownError";
}

bool is_io_error(Err code) {
  switch (code) {
    case Err::BadMagic:
    case Err::TruncatedFile:
    case Err::IoError:
      return true;
    default:
      return false;
  }
}

}  // namespace glossalign
