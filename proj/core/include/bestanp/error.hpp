#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bestanp {

enum class ErrorCode {
  kAngleAtPi,
  kRankDeficient,
  kAzimuthSingular,
  kTooFewPoints,
  kCoplanarPoints,
  kDegenerateQ,
  kEigengapDegenerate,
  kSignVoteTie,
  kSingularNormalMatrix,
  kAzimuthDenominatorVanishes,
  kParallelPlanes,
  kNoForwardSolution,
  kBadParams,
  kLengthMismatch,
  kTrackingLost,
  kDegenerateScene,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library. `stage()` names the pipeline step that
// failed when the error passed through bestanp(); it is empty otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {})
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const {
    return Error(code_, what(), std::move(stage));
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

}  // namespace bestanp
