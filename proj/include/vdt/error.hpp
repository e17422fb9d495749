#pragma once

#include <stdexcept>
#include <string>

namespace vdt {

// Error classes map onto distinct CLI exit codes.
enum class ErrorKind {
    io = 2,
    validation = 3,
    divergence = 4,
    missing_artifact = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(ErrorKind::divergence, what) {}
};

class MissingArtifactError : public Error {
public:
    explicit MissingArtifactError(const std::string& what) : Error(ErrorKind::missing_artifact, what) {}
};

}  // namespace vdt
