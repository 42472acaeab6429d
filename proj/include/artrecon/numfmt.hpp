#pragma once

#include <string>

namespace artrecon {

/// Fixed notation with exactly four decimals, correctly rounded from the
/// binary value (exact ties go to even). A result that rounds to zero is
/// printed without a sign.
std::string format_fixed4(double value);

/// Shortest decimal that round-trips to the same double.
std::string format_real(double value);

/// Parses a full decimal string; throws Error(InvalidArgument) otherwise.
double parse_real(const std::string& text);

}  // namespace artrecon
