#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Locale-independent number and timestamp formatting shared by all writers.
namespace predfilter::text {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Fixed-point with `decimals` digits, rounding half away from zero.
std::string format_fixed(double v, int decimals);

/// Round half away from zero to `decimals` places.
double round_half_up(double v, int decimals);

/// Parses a full decimal string ("nan"/"inf" included). nullopt when the
/// string is not entirely a number.
std::optional<double> parse_double(std::string_view s);

std::optional<std::int64_t> parse_int(std::string_view s);

/// Seconds since the Unix epoch for "YYYY-MM-DD[T ]HH:MM[:SS][Z|+00:00]" or
/// a bare "YYYY-MM-DD". Only UTC offsets are accepted.
std::optional<std::int64_t> parse_iso8601(std::string_view s);

/// "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(std::int64_t unix_seconds);

std::string_view trim(std::string_view s);

/// Splits one CSV line on commas. Double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(std::string_view line);

/// Writes `contents` to `path` via a sibling temp file and rename.
void write_file_atomic(const std::string& path, std::string_view contents);

std::string read_file(const std::string& path);

}  // namespace predfilter::text
