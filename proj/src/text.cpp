#include "consentforge/text.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace consentforge::text {

std::size_t count_runs(std::string_view s) noexcept {
    std::size_t runs = 0;
    bool in_run = false;
    for (char c : s) {
        if (is_space(c)) {
            in_run = false;
        } else if (!in_run) {
            in_run = true;
            ++runs;
        }
    }
    return runs;
}

std::vector<std::string_view> split_runs(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

bool icontains(std::string_view haystack, std::string_view needle) {
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) nl = s.size();
        std::string_view line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

std::string substitute(std::string_view tmpl, std::string_view placeholder, std::string_view value) {
    auto pos = tmpl.find(placeholder);
    if (pos == std::string_view::npos) {
        throw std::logic_error("template lacks placeholder " + std::string(placeholder));
    }
    std::string out;
    out.reserve(tmpl.size() + value.size());
    out.append(tmpl.substr(0, pos));
    out.append(value);
    out.append(tmpl.substr(pos + placeholder.size()));
    return out;
}

} // namespace consentforge::text
