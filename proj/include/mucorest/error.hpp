#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mucorest {

// Base for every error the library raises on purpose. Anything else escaping
// to the CLI is treated as an internal error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class UnsupportedFeature : public Error {
public:
    UnsupportedFeature(std::string what, std::string location)
        : Error(what + " (at " + location + ")"), location_(std::move(location)) {}
    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

class ConfigError : public Error {
public:
    ConfigError(std::string key_path, const std::string& reason)
        : Error(key_path + ": " + reason), key_path_(std::move(key_path)) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

// Scenario document violations; `pointer` is a JSON pointer into the document.
class SchemaError : public Error {
public:
    SchemaError(std::string pointer, const std::string& reason)
        : Error(pointer + ": " + reason), pointer_(std::move(pointer)) {}
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

class ProviderUnavailable : public Error {
public:
    using Error::Error;
};

class TotalsMismatch : public Error {
public:
    using Error::Error;
};

class MalformedReport : public Error {
public:
    using Error::Error;
};

class MissingLineCounter : public Error {
public:
    using Error::Error;
};

class EmptyActionSpace : public Error {
public:
    using Error::Error;
};

class MissingRequiredValue : public Error {
public:
    using Error::Error;
};

class TargetUnreachable : public Error {
public:
    using Error::Error;
};

class ReportWriteFailure : public Error {
public:
    using Error::Error;
};

}  // namespace mucorest
