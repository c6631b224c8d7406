#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lcsens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: missing columns, bad config values, unparseable numbers.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Two rows claim the same (student, KC, order) slot.
class AmbiguityError : public Error {
public:
    using Error::Error;
};

class EmptyDatasetError : public Error {
public:
    explicit EmptyDatasetError(std::string what, std::vector<std::string> reasons = {})
        : Error(std::move(what)), reasons_(std::move(reasons)) {}

    /// One line per rejected KC, e.g. "k3: 9 students < 10".
    const std::vector<std::string>& reasons() const noexcept { return reasons_; }

private:
    std::vector<std::string> reasons_;
};

/// A grouping factor has a single level, so its variance is not identified.
class DegenerateDesignError : public Error {
public:
    using Error::Error;
};

class InnerLoopError : public Error {
public:
    InnerLoopError(std::string what, double last_objective, int iterations)
        : Error(std::move(what)), last_objective_(last_objective), iterations_(iterations) {}

    double last_objective() const noexcept { return last_objective_; }
    int iterations() const noexcept { return iterations_; }

private:
    double last_objective_;
    int iterations_;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace lcsens
