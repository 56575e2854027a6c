#pragma once

#include <stdexcept>
#include <string>

namespace dimml {

// Contract/validation failures (bad shapes, bad config values, unknown keys).
// The CLI maps these to exit code 1.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

// Numeric failures (non-finite values where finiteness is required).
// The CLI maps these, and any other runtime error, to exit code 2.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem and serialization failures (missing files, short reads,
// bad magic bytes). Also exit code 2.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dimml
