#pragma once

#include <string>
#include <string_view>

namespace citeverify {

struct UrlParts {
    std::string scheme;
    std::string host;
    std::string path;  // starts with '/' or is empty
    std::string query;
    std::string fragment;
};

/// Splits an absolute URL of the form scheme://host[:port]/path?query#fragment.
/// Throws MalformedUrl when the scheme or host is missing.
UrlParts parse_url(std::string_view url);

}  // namespace citeverify
