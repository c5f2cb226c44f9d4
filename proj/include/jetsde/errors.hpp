#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jetsde {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value left the domain of the requested operation (log of a
/// non-positive number, division by a zero-valued jet, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Mismatched dimensions between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public Error {
public:
    SyntaxError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " at " + std::to_string(line) + ":" + std::to_string(column)),
          line_(line),
          column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class UnknownSymbolError : public SyntaxError {
public:
    using SyntaxError::SyntaxError;
};

class ArityError : public SyntaxError {
public:
    using SyntaxError::SyntaxError;
};

/// Invalid run configuration (bad level ladder, bad quantile list, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Metric not positive definite at an evaluation point.
class MetricError : public Error {
public:
    using Error::Error;
};

/// No admissible chart covers the requested point.
class AtlasError : public Error {
public:
    using Error::Error;
};

/// Model file violates the JSON schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

class UnsupportedPlotError : public Error {
public:
    using Error::Error;
};

}  // namespace jetsde
