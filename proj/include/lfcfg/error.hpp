#pragma once

#include <stdexcept>
#include <string>

namespace lfcfg {

enum class ErrorKind {
    shape_mismatch,
    format,
    config,
    manifest,
    degenerate,
    model,
    io,
};

const char* to_string(ErrorKind kind);

// Base for every error thrown by the library. `kind` is stable and is what the
// CLI prints on its machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ShapeMismatchError : public Error {
public:
    explicit ShapeMismatchError(const std::string& message) : Error(ErrorKind::shape_mismatch, message) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error(ErrorKind::format, message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class DegenerateError : public Error {
public:
    explicit DegenerateError(const std::string& message) : Error(ErrorKind::degenerate, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

// Raised by the sampler when a VelocityModel throws; carries the step index.
class ModelError : public Error {
public:
    ModelError(int step, const std::string& message)
        : Error(ErrorKind::model, "step " + std::to_string(step) + ": " + message), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace lfcfg
