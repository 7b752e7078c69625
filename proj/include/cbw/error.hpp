#pragma once

#include <stdexcept>
#include <string>

namespace cbw {

// Recoverable failures surface as Error; the CLI maps them to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration; the CLI maps these to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace cbw
