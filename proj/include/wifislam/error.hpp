#pragma once

#include <stdexcept>
#include <string>

namespace wifislam {

enum class ErrorCode {
  kParse,
  kEmptyScanWindow,
  kEmptySignature,
  kNoSignatures,
  kDuplicateAssignment,
  kDanglingEdge,
  kDisconnectedGraph,
  kBadInformation,
  kLengthMismatch,
  kDegenerateAlignment,
  kMemoryCorruption,
  kBadDataset,
  kNoCorrespondence,
  kEmptyMap,
  kInvalidArgument,
  kIo,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wifislam
