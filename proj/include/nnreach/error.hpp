#pragma once

#include <stdexcept>
#include <string>

namespace nnreach {

enum class Errc {
  CycleDetected,
  ArityMismatch,
  DimensionMismatch,
  DanglingEdge,
  InvalidGraph,
  StateDimMismatch,
  UnreachableOutput,
  InvalidInterval,
  MissingPreactivation,
  UnboundedInput,
  IterationLimit,
  TemplateMismatch,
  InvalidArgument,
  ParseError,
  UnknownDemo,
  SearchExhausted,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace nnreach
