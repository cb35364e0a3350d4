#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace litfield {

// Root of every error thrown by the library. `exit_code()` is what the CLI
// returns when the error escapes a command.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}
    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ConfigError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class NotNormalized : public Error { using Error::Error; };
class InvalidDate : public Error { using Error::Error; };
class EmptyCorpus : public Error { using Error::Error; };
class FieldError : public Error { using Error::Error; };
class StratificationError : public Error { using Error::Error; };
class DegenerateLabels : public Error { using Error::Error; };

class NotFound : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

// Retryable by the caller; the provider has already exhausted its own retries.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int status = 0) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }
    int exit_code() const noexcept override { return 3; }

private:
    int status_;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(const std::string& id) : Error("duplicate id: " + id), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class ZeroVector : public Error {
public:
    explicit ZeroVector(const std::string& id) : Error("zero-norm embedding row: " + id), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class InsufficientNeighbors : public Error {
public:
    InsufficientNeighbors(std::size_t found, std::size_t wanted)
        : Error("insufficient previous neighbors: found " + std::to_string(found) + ", need " +
                std::to_string(wanted)),
          found_(found) {}
    std::size_t found() const noexcept { return found_; }

private:
    std::size_t found_;
};

class DegenerateColumn : public Error {
public:
    DegenerateColumn(const std::string& field, const std::string& column)
        : Error("zero-variance column '" + column + "' in field '" + field + "'"),
          field_(field), column_(column) {}
    const std::string& field() const noexcept { return field_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::string field_, column_;
};

class NumericalError : public Error { using Error::Error; };

// An upstream artifact is missing; names the command that produces it.
class UpstreamMissing : public Error {
public:
    UpstreamMissing(const std::string& path, const std::string& producer)
        : Error("missing upstream artifact '" + path + "'; run `litfield " + producer + "` first"),
          producer_(producer) {}
    const std::string& producer() const noexcept { return producer_; }
    int exit_code() const noexcept override { return 3; }

private:
    std::string producer_;
};

}  // namespace litfield
