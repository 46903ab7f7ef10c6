#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace citeverify {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed JSON Lines input, artifact file or config file.
class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, std::string message)
        : Error(source + ":" + std::to_string(line) + ": " + message),
          source_(std::move(source)), line_(line) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

class NoClaim : public Error {
public:
    using Error::Error;
};
class EmptyCorpus : public Error {
public:
    using Error::Error;
};
class UnknownPassage : public Error {
public:
    using Error::Error;
};
class DimensionMismatch : public Error {
public:
    using Error::Error;
};
class ArityMismatch : public Error {
public:
    using Error::Error;
};
class EmptyDocument : public Error {
public:
    using Error::Error;
};
class MalformedUrl : public Error {
public:
    using Error::Error;
};
class EmptyInput : public Error {
public:
    using Error::Error;
};
class DegenerateInput : public Error {
public:
    using Error::Error;
};
class DegenerateAgreement : public Error {
public:
    using Error::Error;
};
class NoInformative : public Error {
public:
    using Error::Error;
};
class ConfigError : public Error {
public:
    using Error::Error;
};
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace citeverify
