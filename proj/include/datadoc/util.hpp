#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace datadoc::util {

/// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

std::string to_lower(std::string_view s);

std::string trim(std::string_view s);
std::string rtrim(std::string_view s);

/// Count whole-word, case-insensitive occurrences of `term` in `text`.
/// Word boundaries are non-alphanumeric characters or the text edges.
int whole_word_count(std::string_view text, std::string_view term);

/// Newline normalization (CRLF/CR -> LF) plus trailing-whitespace trim.
/// Used for content hashing so that line-ending differences do not
/// produce distinct document ids.
std::string normalize_text(std::string_view text);

/// Current UTC time as ISO-8601 ("2024-01-31T12:00:00Z").
std::string iso_timestamp_now();

std::vector<std::string> split_on(std::string_view s, std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace datadoc::util
