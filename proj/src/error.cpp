#include "wifislam/error.hpp"

namespace wifislam {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kEmptyScanWindow: return "EmptyScanWindow";
    case ErrorCode::kEmptySignature: return "EmptySignature";
    case ErrorCode::kNoSignatures: return "NoSignatures";
    case ErrorCode::kDuplicateAssignment: return "DuplicateAssignment";
    case ErrorCode::kDanglingEdge: return "DanglingEdge";
    case ErrorCode::kDisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::kBadInformation: return "BadInformation";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateAlignment: return "DegenerateAlignment";
    case ErrorCode::kMemoryCorruption: return "MemoryCorruption";
    case ErrorCode::kBadDataset: return "BadDataset";
    case ErrorCode::kNoCorrespondence: return "NoCorrespondence";
    case ErrorCode::kEmptyMap: return "EmptyMap";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace wifislam
