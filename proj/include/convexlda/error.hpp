#pragma once

#include <stdexcept>
#include <string>

namespace convexlda {

/// Base of every error thrown by the library. The CLI maps the concrete
/// subclasses onto its exit-code taxonomy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad parameter, degenerate data).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Matrix dimensions do not agree.
class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A factorization or iteration failed numerically.
class NumericError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Text input has a cell that does not parse.
class ParseError : public IoError {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : IoError(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
          row_(row),
          column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Binary input does not follow its declared format.
class FormatError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace convexlda
