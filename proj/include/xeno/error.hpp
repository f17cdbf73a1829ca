#pragma once

#include <stdexcept>
#include <string>

namespace xeno {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input documents, bad flags.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A model, system or intervention violates its invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An operation's precondition does not hold for otherwise valid inputs
/// (degenerate core, failed hypothesis, dimension mismatch, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Exact computation requested on a model that can only be sampled.
class NonEnumerableError : public Error {
public:
    using Error::Error;
};

/// An external compliance callback failed or timed out.
class CallbackError : public Error {
public:
    using Error::Error;
};

} // namespace xeno
