#pragma once

#include <stdexcept>
#include <string>

namespace pktime {

/// Invalid or inconsistent configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Missing, malformed, or insufficient input data. CLI exit code 3.
class DataError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Non-finite values or a degenerate numeric problem. CLI exit code 4.
class NumericError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class ShapeError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

} // namespace pktime
