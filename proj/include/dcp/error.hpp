#ifndef DCP_ERROR_HPP
#define DCP_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcp {

enum class ErrorCode {
  // input errors
  MissingFrames,
  DimensionMismatch,
  DecodeFailure,
  MissingGroundTruth,
  KindMismatch,
  IoFailure,
  OversizedObject,
  ArchMismatch,
  EmptyTrainingSet,
  IndivisibleSize,
  TooSmall,
  NoValidCandidate,
  MaskTouchesBorder,
  EmptyCounts,
  InvalidArgument,
  // numerical failures
  DivergedLoss,
  DivergedObjective,
  SolverFailure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFrames: return "MissingFrames";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DecodeFailure: return "DecodeFailure";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::OversizedObject: return "OversizedObject";
    case ErrorCode::ArchMismatch: return "ArchMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::IndivisibleSize: return "IndivisibleSize";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::NoValidCandidate: return "NoValidCandidate";
    case ErrorCode::MaskTouchesBorder: return "MaskTouchesBorder";
    case ErrorCode::EmptyCounts: return "EmptyCounts";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::DivergedObjective: return "DivergedObjective";
    case ErrorCode::SolverFailure: return "SolverFailure";
  }
  return "Unknown";
}

/// True for failures of the numerics (divergence, solver caps) as opposed to bad input.
inline bool is_numerical(ErrorCode code) {
  return code == ErrorCode::DivergedLoss || code == ErrorCode::DivergedObjective ||
         code == ErrorCode::SolverFailure;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace dcp

#endif  // DCP_ERROR_HPP
