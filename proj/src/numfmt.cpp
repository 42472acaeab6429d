#include "artrecon/numfmt.hpp"

#include <charconv>
#include <cmath>

#include "artrecon/error.hpp"

namespace artrecon {

std::string format_fixed4(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::InvalidArgument, "non-finite value cannot be formatted");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 4);
  if (ec != std::errc{}) throw Error(ErrorCode::InvalidArgument, "value out of formatting range");
  std::string out(buf, end);
  if (out == "-0.0000") out = "0.0000";
  return out;
}

std::string format_real(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error(ErrorCode::InvalidArgument, "value out of formatting range");
  return std::string(buf, end);
}

double parse_real(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw Error(ErrorCode::InvalidArgument, "not a number: '" + text + "'");
  return value;
}

}  // namespace artrecon
