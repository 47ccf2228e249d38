#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metricforge {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    usage = 1,
    data = 2,
    extraction = 3,
    numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

// ---- data errors -----------------------------------------------------------

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Malformed input file. `line` and `column` are 1-based; 0 means "not applicable".
class ParseError : public DataError {
public:
    ParseError(std::string source, std::size_t line, std::size_t column, const std::string& message)
        : DataError(format(source, line, column, message)),
          source_(std::move(source)),
          line_(line),
          column_(column) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& source, std::size_t line, std::size_t column,
                              const std::string& message) {
        std::string out = source;
        if (line > 0) out += ":" + std::to_string(line);
        if (column > 0) out += ":" + std::to_string(column);
        return out + ": " + message;
    }

    std::string source_;
    std::size_t line_;
    std::size_t column_;
};

class IngestionError : public DataError {
public:
    using DataError::DataError;
};

class SplitError : public DataError {
public:
    using DataError::DataError;
};

class JoinError : public DataError {
public:
    using DataError::DataError;
};

/// A metric score is missing for a candidate that appears in a ranked pair.
class LookupError : public DataError {
public:
    using DataError::DataError;
};

/// A feature vector breaks one or more FeatureVector invariants.
class ValidationError : public DataError {
public:
    ValidationError(const std::string& what, std::vector<std::string> violations)
        : DataError(what), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

// ---- extraction errors -----------------------------------------------------

class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, std::vector<std::string> unfetched = {})
        : Error(ErrorKind::extraction, what), unfetched_(std::move(unfetched)) {}

    /// Pair digests that could not be obtained.
    const std::vector<std::string>& unfetched() const noexcept { return unfetched_; }

private:
    std::vector<std::string> unfetched_;
};

/// The remote extractor answered, but with a payload that breaks the wire contract.
class ProtocolError : public ExtractionError {
public:
    using ExtractionError::ExtractionError;
};

/// Offline mode and the cache does not hold every requested pair.
class CacheMissError : public ExtractionError {
public:
    using ExtractionError::ExtractionError;
};

// ---- numeric errors --------------------------------------------------------

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

/// Statistic undefined on the input (length mismatch, constant input, all ties, empty set).
class DegenerateInputError : public NumericError {
public:
    using NumericError::NumericError;
};

class ShapeError : public NumericError {
public:
    using NumericError::NumericError;
};

class SingularSystemError : public NumericError {
public:
    using NumericError::NumericError;
};

class DivergenceError : public NumericError {
public:
    DivergenceError(std::size_t epoch, const std::string& what) : NumericError(what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace metricforge
