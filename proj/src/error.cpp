#include "dyadrobust/error.hpp"

namespace dyadrobust {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::UnparsableCell: return "UnparsableCell";
    case ErrorKind::SelfDyad: return "SelfDyad";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::DegenerateUnits: return "DegenerateUnits";
    case ErrorKind::MismatchedCoefficients: return "MismatchedCoefficients";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace dyadrobust
