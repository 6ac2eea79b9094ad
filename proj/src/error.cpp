#include "evimix/error.hpp"

namespace evimix {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidThreshold: return "InvalidThreshold";
    case ErrorKind::NoExceedances: return "NoExceedances";
    case ErrorKind::OutOfSupport: return "OutOfSupport";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::MissingCoordinates: return "MissingCoordinates";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::RaggedPanel: return "RaggedPanel";
    case ErrorKind::DegenerateQuantile: return "DegenerateQuantile";
    case ErrorKind::RepairFailed: return "RepairFailed";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InnerDiverged: return "InnerDiverged";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Unknown";
}

namespace {
std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out;
}
}  // namespace

NoExceedancesError::NoExceedancesError(std::vector<std::string> areas)
    : Error(ErrorKind::NoExceedances,
            "no threshold exceedances in area(s): " + join_ids(areas)),
      areas_(std::move(areas)) {}

}  // namespace evimix
