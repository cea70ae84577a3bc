#pragma once

#include <stdexcept>
#include <string>

namespace afgd {

enum class Errc {
  ShapeMismatch,
  ZeroMatrix,
  NonFinite,
  DegenerateProblem,
  ZeroGradient,
  NegativeEstimate,
  MissingGroundTruth,
  NumericalBlowup,
  InvalidArgument,
  Io,
};

constexpr const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ZeroMatrix: return "ZeroMatrix";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DegenerateProblem: return "DegenerateProblem";
    case Errc::ZeroGradient: return "ZeroGradient";
    case Errc::NegativeEstimate: return "NegativeEstimate";
    case Errc::MissingGroundTruth: return "MissingGroundTruth";
    case Errc::NumericalBlowup: return "NumericalBlowup";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  Errc code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace afgd
