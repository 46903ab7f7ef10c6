#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace citeverify {

/// Lowercased ASCII alphanumeric runs. Every other byte (punctuation,
/// whitespace, UTF-8 continuation bytes) separates tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Maximal non-whitespace runs, unmodified. This is the unit of passage
/// window arithmetic.
std::vector<std::string_view> split_words(std::string_view text);

std::string join_words(const std::vector<std::string_view>& words, std::size_t begin,
                       std::size_t end);

std::string_view trim(std::string_view s);

/// Stable 64-bit string hash (FNV-1a followed by a splitmix64 finalizer).
/// Unlike std::hash the value is identical across platforms and runs, which
/// the on-disk artifacts and the dataset split rely on.
std::uint64_t stable_hash(std::string_view s, std::uint64_t seed = 0);

std::uint64_t mix64(std::uint64_t x);

}  // namespace citeverify
