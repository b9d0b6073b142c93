#pragma once

#include <stdexcept>
#include <string>

namespace rcme {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateSample,
  kCheiralityTie,
  kSingularCovariance,
  kRankDeficientJacobian,
  kEpipoleDegenerate,
  kDegenerateCovariance,
  kInconclusiveTest,
  kPointAtInfinity,
  kTooFewCorrespondences,
  kEmptyFrustum,
  kParse,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

// Thrown by every operation that can refuse its input. Callers inside the
// estimation loop catch it and discard the iteration.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rcme
