#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace consentforge::text {

/// ASCII whitespace: space, \t, \n, \v, \f, \r.
constexpr bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

/// Number of maximal non-whitespace runs. This is the single token/word rule
/// used by the corpus statistics, summary word limits and option checks.
std::size_t count_runs(std::string_view s) noexcept;

/// The maximal non-whitespace runs themselves.
std::vector<std::string_view> split_runs(std::string_view s);

std::string_view trim(std::string_view s) noexcept;

/// Collapse every whitespace run to one space and strip both ends. Case is kept.
std::string normalize_whitespace(std::string_view s);

std::string to_lower(std::string_view s);

bool iequals(std::string_view a, std::string_view b) noexcept;

/// Case-insensitive substring search (ASCII folding only).
bool icontains(std::string_view haystack, std::string_view needle);

std::vector<std::string> split_lines(std::string_view s);

/// Replace the single occurrence of `placeholder` in `tmpl` with `value`.
std::string substitute(std::string_view tmpl, std::string_view placeholder, std::string_view value);

} // namespace consentforge::text
