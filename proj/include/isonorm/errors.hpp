#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isonorm {

// Every library error carries a stable code so the CLI can map error classes
// to distinct process exit codes and machine-readable names.
enum class ErrorCode : int {
  Generic = 1,
  Usage = 2,
  Shape = 3,
  NonFinite = 4,
  InsufficientData = 5,
  Eigen = 6,
  InvalidResidueClass = 7,
  NotPrimePower = 8,
  SizeLimit = 9,
  NoConstruction = 10,
  DegenerateDistribution = 11,
  DegenerateChannel = 12,
  RankDeficient = 13,
  TrainingDiverged = 14,
  IncompleteNormalizer = 15,
  Format = 16,
  Checksum = 17,
  Parse = 18,
  Io = 19,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::Generic: return "generic";
    case ErrorCode::Usage: return "usage";
    case ErrorCode::Shape: return "shape_error";
    case ErrorCode::NonFinite: return "non_finite_input";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::Eigen: return "eigen_failure";
    case ErrorCode::InvalidResidueClass: return "invalid_residue_class";
    case ErrorCode::NotPrimePower: return "not_prime_power";
    case ErrorCode::SizeLimit: return "size_limit_exceeded";
    case ErrorCode::NoConstruction: return "no_known_construction";
    case ErrorCode::DegenerateDistribution: return "degenerate_distribution";
    case ErrorCode::DegenerateChannel: return "degenerate_channel";
    case ErrorCode::RankDeficient: return "rank_deficient";
    case ErrorCode::TrainingDiverged: return "training_diverged";
    case ErrorCode::IncompleteNormalizer: return "incomplete_normalizer";
    case ErrorCode::Format: return "format_error";
    case ErrorCode::Checksum: return "checksum_failure";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Io: return "io_error";
  }
  return "generic";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorCode::Shape, w) {}
};

struct NonFiniteInput : Error {
  explicit NonFiniteInput(const std::string& w) : Error(ErrorCode::NonFinite, w) {}
};

struct InsufficientData : Error {
  explicit InsufficientData(const std::string& w)
      : Error(ErrorCode::InsufficientData, w) {}
};

struct EigenFailure : Error {
  explicit EigenFailure(const std::string& w) : Error(ErrorCode::Eigen, w) {}
};

struct InvalidResidueClass : Error {
  explicit InvalidResidueClass(const std::string& w)
      : Error(ErrorCode::InvalidResidueClass, w) {}
};

struct NotPrimePower : Error {
  explicit NotPrimePower(const std::string& w)
      : Error(ErrorCode::NotPrimePower, w) {}
};

struct SizeLimitExceeded : Error {
  explicit SizeLimitExceeded(const std::string& w)
      : Error(ErrorCode::SizeLimit, w) {}
};

struct NoKnownConstruction : Error {
  explicit NoKnownConstruction(const std::string& w)
      : Error(ErrorCode::NoConstruction, w) {}
};

struct DegenerateDistribution : Error {
  explicit DegenerateDistribution(const std::string& w)
      : Error(ErrorCode::DegenerateDistribution, w) {}
};

struct DegenerateChannel : Error {
  DegenerateChannel(std::size_t channel, const std::string& w)
      : Error(ErrorCode::DegenerateChannel, w), index(channel) {}
  std::size_t index;
};

struct RankDeficient : Error {
  RankDeficient(double rank, const std::string& w)
      : Error(ErrorCode::RankDeficient, w), effective_rank(rank) {}
  double effective_rank;
};

struct TrainingDiverged : Error {
  TrainingDiverged(std::size_t at_step, const std::string& w)
      : Error(ErrorCode::TrainingDiverged, w), step(at_step) {}
  std::size_t step;
};

struct IncompleteNormalizer : Error {
  explicit IncompleteNormalizer(const std::string& w)
      : Error(ErrorCode::IncompleteNormalizer, w) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorCode::Format, w) {}
};

struct ChecksumFailure : Error {
  explicit ChecksumFailure(const std::string& w) : Error(ErrorCode::Checksum, w) {}
};

struct ParseError : Error {
  ParseError(std::size_t at_line, const std::string& w)
      : Error(ErrorCode::Parse, w), line(at_line) {}
  std::size_t line;
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::Io, w) {}
};

}  // namespace isonorm
