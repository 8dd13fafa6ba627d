#pragma once

#include <stdexcept>
#include <string>

namespace psinfer {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- data loading / shaping ---

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& name)
      : Error("missing column: " + name), column(name) {}
  std::string column;
};

class NonBinaryOutcome : public Error {
 public:
  using Error::Error;
};

class NonBinaryTreatment : public Error {
 public:
  using Error::Error;
};

class UnparseableCell : public Error {
 public:
  UnparseableCell(std::size_t row_1based, std::size_t col_1based, const std::string& what)
      : Error("unparseable cell at row " + std::to_string(row_1based) + ", column " +
              std::to_string(col_1based) + ": " + what),
        row(row_1based),
        col(col_1based) {}
  std::size_t row;
  std::size_t col;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class UnknownColumn : public Error {
 public:
  explicit UnknownColumn(const std::string& name)
      : Error("unknown column: " + name), column(name) {}
  std::string column;
};

class TooManyLevels : public Error {
 public:
  using Error::Error;
};

// --- model fitting ---

class NoVariation : public Error {
 public:
  using Error::Error;
};

class QuasiSeparation : public Error {
 public:
  using Error::Error;
};

class SingularInformation : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// --- estimation ---

class DegeneratePropensity : public Error {
 public:
  using Error::Error;
};

class EmptyArm : public Error {
 public:
  using Error::Error;
};

// --- variance machinery ---

class SingularBread : public Error {
 public:
  using Error::Error;
};

class JacobianNonFinite : public Error {
 public:
  using Error::Error;
};

// --- bootstrap / CI ---

class ExcessiveFailures : public Error {
 public:
  using Error::Error;
};

class TooFewReplicates : public Error {
 public:
  using Error::Error;
};

class NegativeSE : public Error {
 public:
  using Error::Error;
};

// --- data generation / simulation ---

class BracketFailure : public Error {
 public:
  using Error::Error;
};

class InvalidGrid : public Error {
 public:
  using Error::Error;
};

class StratumExhausted : public Error {
 public:
  using Error::Error;
};

class TooFewReps : public Error {
 public:
  using Error::Error;
};

class ExcessiveRepFailures : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a library contract (bad argument combinations and the like).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace psinfer
