#pragma once

#include <stdexcept>
#include <string>

namespace mttsiam {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration (bag thresholds, fusion weights, keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

/// Malformed input files; the message carries file and line.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace mttsiam
