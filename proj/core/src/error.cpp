#include "bestanp/error.hpp"

namespace bestanp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAngleAtPi: return "AngleAtPi";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kAzimuthSingular: return "AzimuthSingular";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kCoplanarPoints: return "CoplanarPoints";
    case ErrorCode::kDegenerateQ: return "DegenerateQ";
    case ErrorCode::kEigengapDegenerate: return "EigengapDegenerate";
    case ErrorCode::kSignVoteTie: return "SignVoteTie";
    case ErrorCode::kSingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorCode::kAzimuthDenominatorVanishes: return "AzimuthDenominatorVanishes";
    case ErrorCode::kParallelPlanes: return "ParallelPlanes";
    case ErrorCode::kNoForwardSolution: return "NoForwardSolution";
    case ErrorCode::kBadParams: return "BadParams";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTrackingLost: return "TrackingLost";
    case ErrorCode::kDegenerateScene: return "DegenerateScene";
  }
  return "Unknown";
}

}  // namespace bestanp
