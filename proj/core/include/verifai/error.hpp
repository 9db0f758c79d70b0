#pragma once

#include <stdexcept>
#include <string>

namespace verifai {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad corpus input: duplicate IDs, malformed lines.
class IngestError : public Error {
public:
    using Error::Error;
};

/// Index build/open failures, including on-disk format mismatches.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Caller supplied an argument that violates an operation's precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Transport or server failure talking to an inference backend.
class BackendError : public Error {
public:
    using Error::Error;
};

/// Backend answered, but the payload does not follow the wire contract.
class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Retrieval produced nothing to answer from.
class NoResultsError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; `stage()` names it ("retrieval", "generation",
/// "parsing", "verification").
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error(stage + ": " + message), stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

}  // namespace verifai
