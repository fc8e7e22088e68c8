#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nrlearn {

// Invalid setup: bad dimensions, out-of-range parameters, malformed config.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative numeric routine failed to converge, or a generator gave up.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// A trajectory produced a non-finite parameter. Carries the tick at which
// the update blew up so the trial can be recorded rather than discarded.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, std::int64_t tick)
        : std::runtime_error(msg + " (tick " + std::to_string(tick) + ")"), tick_(tick) {}
    std::int64_t tick() const { return tick_; }

private:
    std::int64_t tick_;
};

} // namespace nrlearn
