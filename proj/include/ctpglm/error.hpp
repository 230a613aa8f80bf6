#pragma once

#include <stdexcept>
#include <string>

namespace ctpglm {

/// Malformed input or a violated data invariant.
class DataError : public std::runtime_error
{
public:
	using std::runtime_error::runtime_error;
};

/// Non-convergence, separation, exceeded search guards.
class NumericalError : public std::runtime_error
{
public:
	using std::runtime_error::runtime_error;
};

} // namespace ctpglm
