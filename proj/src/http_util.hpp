#pragma once

#include <string>
#include <string_view>

#include "consentforge/error.hpp"

namespace consentforge::detail {

/// "https://host:8080/api/v2" -> origin "https://host:8080", path "/api/v2".
struct UrlParts {
    std::string origin;
    std::string path;
};

inline UrlParts split_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw Error(ErrorCode::InvalidInput, "URL lacks a scheme: " + std::string(url));
    }
    auto path_start = url.find('/', scheme_end + 3);
    UrlParts parts;
    if (path_start == std::string_view::npos) {
        parts.origin = std::string(url);
    } else {
        parts.origin = std::string(url.substr(0, path_start));
        parts.path = std::string(url.substr(path_start));
    }
    while (!parts.path.empty() && parts.path.back() == '/') parts.path.pop_back();
    return parts;
}

} // namespace consentforge::detail
