#pragma once

#include <stdexcept>
#include <string>

namespace eemdx {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Mismatched lengths or shapes between series, signals or coefficient vectors.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input too short for the requested operation.
class TooShortError : public Error {
public:
    using Error::Error;
};

class NoOverlapError : public Error {
public:
    using Error::Error;
};

class DegenerateEnvelopeError : public Error {
public:
    using Error::Error;
};

class UndefinedCorrelationError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ReferenceError : public Error {
public:
    using Error::Error;
};

class OrderingError : public Error {
public:
    using Error::Error;
};

class ImputationError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

}  // namespace eemdx
