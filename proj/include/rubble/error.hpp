#pragma once

#include <stdexcept>
#include <string>

namespace rubble {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or out-of-range configuration value; `field()` names the offender.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

class AssetError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rubble
