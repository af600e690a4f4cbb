#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dyadrobust {

enum class ErrorKind {
  MissingColumn,
  UnparsableCell,
  SelfDyad,
  EmptyDataset,
  RankDeficient,
  DegenerateUnits,
  MismatchedCoefficients,
  EmptyGroup,
  ConfigError,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every module error carries a kind plus optional location payload so the CLI
// can report it as structured JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  Error& at_row(std::size_t row) {
    row_ = row;
    return *this;
  }
  Error& at_column(std::string column) {
    column_ = std::move(column);
    return *this;
  }
  Error& with_value(double value) {
    value_ = value;
    return *this;
  }

  const std::optional<std::size_t>& row() const noexcept { return row_; }
  const std::optional<std::string>& column() const noexcept { return column_; }
  const std::optional<double>& value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> row_;
  std::optional<std::string> column_;
  std::optional<double> value_;
};

}  // namespace dyadrobust
