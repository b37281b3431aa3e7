#pragma once

#include <stdexcept>
#include <string>

namespace delayscape {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: measurement files, artifacts, queries.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input that parses but violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Geometric failure: degenerate triangles, empty edge balls, points outside the mesh.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Optimal-transport failure (supports in different components).
class TransportError : public Error {
public:
    using Error::Error;
};

/// Remote measurement retrieval failed: HTTP errors, exhausted retries, empty windows.
class FetchError : public Error {
public:
    using Error::Error;
};

/// Error raised by a pipeline stage; the message carries the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace delayscape
