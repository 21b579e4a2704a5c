#pragma once

#include <stdexcept>
#include <string>

namespace tflow {

/// Invalid configuration: bad dimensions, unknown keys, out-of-range settings.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke an operation's precondition (e.g. a non-causal tracklet pair).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Training failed (single-class data, NaN loss).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken internal invariant; should be unreachable.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace tflow
