#include "nnreach/error.hpp"

namespace nnreach {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DanglingEdge: return "DanglingEdge";
    case Errc::InvalidGraph: return "InvalidGraph";
    case Errc::StateDimMismatch: return "StateDimMismatch";
    case Errc::UnreachableOutput: return "UnreachableOutput";
    case Errc::InvalidInterval: return "InvalidInterval";
    case Errc::MissingPreactivation: return "MissingPreactivation";
    case Errc::UnboundedInput: return "UnboundedInput";
    case Errc::IterationLimit: return "IterationLimit";
    case Errc::TemplateMismatch: return "TemplateMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownDemo: return "UnknownDemo";
    case Errc::SearchExhausted: return "SearchExhausted";
  }
  return "Unknown";
}

}  // namespace nnreach
