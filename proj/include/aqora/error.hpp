#pragma once

#include <stdexcept>
#include <string>

namespace aqora {

// Error categories map onto CLI exit codes (see tools/aqora_cli.cpp).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an action that masking should have filtered reaches the plan
// layer (out-of-range leaf positions and the like).
struct InvalidActionError : std::runtime_error {
    explicit InvalidActionError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace aqora
