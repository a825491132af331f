#pragma once

#include <stdexcept>
#include <string>

namespace theramon {

/// Base of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed structure, files, configuration or call contracts.
/// The CLI maps these to exit code 2.
struct InputError : Error {
    using Error::Error;
};

struct StructuralError : InputError {
    using InputError::InputError;
};

struct ContractError : InputError {
    using InputError::InputError;
};

struct ConfigError : InputError {
    using InputError::InputError;
};

struct DataError : InputError {
    using InputError::InputError;
};

struct ParseError : InputError {
    using InputError::InputError;
};

struct VersionError : ParseError {
    using ParseError::ParseError;
};

/// Failures of the numerical machinery (exit code 3).
struct ComputeError : Error {
    using Error::Error;
};

/// A node whose full conditional has no exact sampler.
struct CapabilityError : ComputeError {
    CapabilityError(std::string node, const std::string& what)
        : ComputeError("node '" + node + "': " + what), node_(std::move(node)) {}

    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

struct NumericError : ComputeError {
    using ComputeError::ComputeError;
};

}  // namespace theramon
