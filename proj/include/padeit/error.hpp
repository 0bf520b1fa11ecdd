#pragma once

#include <stdexcept>
#include <string>

namespace padeit {

/// Base class for all toolkit errors. `kind()` is a stable machine-readable tag
/// that the CLI prints on failure.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error("parse_error", "line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error("validation_error", what) {}
};

class PlacementError : public Error {
public:
    enum class Reason { collision, out_of_surface, retries_exhausted };

    PlacementError(Reason reason, const std::string& what)
        : Error(tag(reason), what), reason_(reason) {}

    Reason reason() const noexcept { return reason_; }

private:
    static std::string tag(Reason r) {
        switch (r) {
        case Reason::collision: return "placement_collision";
        case Reason::out_of_surface: return "placement_out_of_surface";
        case Reason::retries_exhausted: return "placement_retries_exhausted";
        }
        return "placement_error";
    }
    Reason reason_;
};

class SolverError : public Error {
public:
    explicit SolverError(const std::string& what) : Error("solver_error", what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension_mismatch", what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("data_error", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io_error", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

} // namespace padeit
