#pragma once

#include <stdexcept>
#include <string>

namespace lcmito {

// Bad user input or malformed data. The CLI maps this to exit code 1.
struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failure: ill-conditioning, overflow, divergence. CLI exit code 2.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lcmito
