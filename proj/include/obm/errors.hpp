#pragma once

#include <stdexcept>
#include <string>

namespace obm {

// Invalid user configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Quadrature or search failed to reach its tolerance (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The limit-law tail bound could not be certified within the horizon cap.
class HorizonError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// A loop that terminates almost surely did not; indicates a bug.
class InternalFault : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace obm
