// Small shared helpers: power-of-two checks, numeric formatting, parsing.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace polarlab {

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// log2 of a power of two; throws std::invalid_argument otherwise.
int exact_log2(std::size_t n);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Full-string double parse; throws std::invalid_argument on junk.
double parse_double(std::string_view s);

/// Quotes a CSV field when it contains a comma or a quote.
std::string csv_field(const std::string& s);

std::vector<std::string_view> split(std::string_view s, char sep);

/// 64-bit FNV-1a over a byte range.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

} // namespace polarlab
