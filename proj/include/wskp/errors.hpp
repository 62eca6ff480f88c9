#pragma once

#include <stdexcept>
#include <string>

namespace wskp {

// Base of every error raised by the library. Subclasses name the failure
// category so callers (and the CLI exit-code mapping) can discriminate.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class UnsupportedChannels : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class StateError : public Error { using Error::Error; };
class ResourceError : public Error { using Error::Error; };

} // namespace wskp
