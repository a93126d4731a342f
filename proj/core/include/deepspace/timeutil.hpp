#ifndef DEEPSPACE_TIMEUTIL_HPP
#define DEEPSPACE_TIMEUTIL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace deepspace {

/// Whole seconds since 1970-01-01 00:00:00, no timezone arithmetic.
using Timestamp = std::int64_t;

/// Parses "YYYY-MM-DD HH:MM:SS". Returns nullopt on malformed input or
/// out-of-range calendar fields.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Inverse of parse_timestamp, always "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(Timestamp t);

}  // namespace deepspace

#endif  // DEEPSPACE_TIMEUTIL_HPP
