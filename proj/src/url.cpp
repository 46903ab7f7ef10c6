#include "citeverify/url.hpp"

#include <cctype>

#include "citeverify/errors.hpp"

namespace citeverify {

UrlParts parse_url(std::string_view url) {
    UrlParts parts;
    const auto sep = url.find("://");
    if (sep == std::string_view::npos || sep == 0) {
        throw MalformedUrl("missing scheme in URL '" + std::string(url) + "'");
    }
    for (char c : url.substr(0, sep)) {
        const auto uc = static_cast<unsigned char>(c);
        if (!std::isalnum(uc) && c != '+' && c != '-' && c != '.') {
            throw MalformedUrl("invalid scheme in URL '" + std::string(url) + "'");
        }
    }
    parts.scheme = std::string(url.substr(0, sep));

    std::string_view rest = url.substr(sep + 3);
    if (const auto hash = rest.find('#'); hash != std::string_view::npos) {
        parts.fragment = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    if (const auto q = rest.find('?'); q != std::string_view::npos) {
        parts.query = std::string(rest.substr(q + 1));
        rest = rest.substr(0, q);
    }
    const auto slash = rest.find('/');
    parts.host = std::string(rest.substr(0, slash));
    if (slash != std::string_view::npos) parts.path = std::string(rest.substr(slash));
    if (parts.host.empty()) {
        throw MalformedUrl("missing host in URL '" + std::string(url) + "'");
    }
    for (char c : parts.host) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            throw MalformedUrl("whitespace in host of URL '" + std::string(url) + "'");
        }
    }
    return parts;
}

}  // namespace citeverify
