#ifndef CFSM_FORMAT_HPP
#define CFSM_FORMAT_HPP

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace cfsm {

/// Shortest decimal form that round-trips to the same double. Locale-free,
/// so CSV bytes depend only on the values.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (result.ec != std::errc()) return "nan";
  return std::string(buffer, result.ptr);
}

}  // namespace cfsm

#endif  // CFSM_FORMAT_HPP
