#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace linkring {

// Every domain failure carries one of these kinds; the CLI maps them to exit
// code 1 and the service reports the name in 422/409 bodies.
enum class ErrorKind {
  NoAssembly,
  Unreachable,
  NearSingular,
  Singular,
  NoContactPose,
  OutOfRange,
  InvalidChannel,
  PulseOutOfRange,
  AngleOutOfRange,
  TransportError,
  ParseError,
  ValidationError,
  EmptyCatalog,
  UnknownTrial,
  AlreadyAnswered,
  InvalidAnswer,
  IncompleteSession,
  CatalogMismatch,
  EmptyRow,
  DegenerateData,
  InsufficientData,
  InvalidDf,
  Conflict,
};

constexpr std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NoAssembly: return "NoAssembly";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::NearSingular: return "NearSingular";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::NoContactPose: return "NoContactPose";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidChannel: return "InvalidChannel";
    case ErrorKind::PulseOutOfRange: return "PulseOutOfRange";
    case ErrorKind::AngleOutOfRange: return "AngleOutOfRange";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::EmptyCatalog: return "EmptyCatalog";
    case ErrorKind::UnknownTrial: return "UnknownTrial";
    case ErrorKind::AlreadyAnswered: return "AlreadyAnswered";
    case ErrorKind::InvalidAnswer: return "InvalidAnswer";
    case ErrorKind::IncompleteSession: return "IncompleteSession";
    case ErrorKind::CatalogMismatch: return "CatalogMismatch";
    case ErrorKind::EmptyRow: return "EmptyRow";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::InvalidDf: return "InvalidDf";
    case ErrorKind::Conflict: return "Conflict";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace linkring
