#pragma once

#include <stdexcept>
#include <string>

namespace litecan {

// Base for every error the library throws.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration: bad key, bad value, bad combination of settings.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// Malformed input data: parse failures, bad checkpoints, incompatible datasets.
struct DataError : Error {
    explicit DataError(const std::string& what) : Error(what) {}
};

// Shape or contract violation inside the tensor engine.
struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(what) {}
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& what) : Error(what) {}
};

}  // namespace litecan
