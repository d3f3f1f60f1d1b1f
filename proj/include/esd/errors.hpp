#pragma once

#include <stdexcept>
#include <string>

namespace esd {

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation called in the wrong delay regime, e.g. delayed bounds with D_M = 0.
class RegimeError : public std::invalid_argument {
public:
    explicit RegimeError(const std::string& what) : std::invalid_argument(what) {}
};

/// A bound chain denominator is nonpositive (CLI exit code 4).
class ChainUndefined : public std::runtime_error {
public:
    ChainUndefined(std::string denominator, double value)
        : std::runtime_error("bound chain undefined: denominator " + denominator +
                             " = " + std::to_string(value) + " is not positive"),
          denominator_(std::move(denominator)),
          value_(value) {}

    const std::string& denominator() const noexcept { return denominator_; }
    double value() const noexcept { return value_; }

private:
    std::string denominator_;
    double value_;
};

}  // namespace esd
