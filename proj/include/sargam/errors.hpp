#pragma once

#include <stdexcept>
#include <string>

namespace sargam {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

struct ArgumentError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct IndexError : Error {
    using Error::Error;
};

struct CorruptionError : Error {
    using Error::Error;
};

struct ScriptError : Error {
    using Error::Error;
};

struct LocalizationError : Error {
    using Error::Error;
};

struct GenerationError : Error {
    GenerationError(const std::string& msg, int status = 0)
        : Error(msg), http_status(status) {}
    int http_status;
};

struct TrainingError : Error {
    using Error::Error;
};

struct DegenerateSampleError : Error {
    using Error::Error;
};

} // namespace sargam
