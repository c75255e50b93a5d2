#pragma once

#include <stdexcept>
#include <string>

namespace xopgan {

/// Shape or rank disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent architecture or training configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Value outside its admissible domain (non-finite data, bad range).
class ValueError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// File-system or codec failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training diverged or a loss became non-finite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace xopgan
