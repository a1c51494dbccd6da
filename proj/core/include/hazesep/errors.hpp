#pragma once

#include <stdexcept>
#include <string>

namespace hazesep {

/// Invalid or unknown configuration keys/values. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-system or file-format failures. CLI exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite iterates, diverging training and similar. CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hazesep
