#pragma once

#include <stdexcept>
#include <string>

namespace ibprox {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Incompatible shapes or invalid indices.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Operation requested on an object that cannot support it
/// (e.g. an exact block prox for a problem that has none).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Malformed input file or unwritable output.
class IoError : public Error {
public:
    using Error::Error;
};

/// Objective became non-finite or blew past the runaway guard.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double last_objective)
        : Error(what), last_objective(last_objective) {}
    double last_objective;
};

}  // namespace ibprox
