#pragma once

#include <stdexcept>
#include <string>

namespace irs {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument is outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numeric kernel failed to reach its tolerance within the iteration cap.
class NumericsError : public Error {
public:
    using Error::Error;
};

class UnsupportedGeneratorError : public Error {
public:
    using Error::Error;
};

/// No closed-form smoothing oracle exists for the classifier kind(s).
class UnsupportedOracleError : public Error {
public:
    using Error::Error;
};

/// External classifier could not be reached or answered with an error frame.
class TransportError : public Error {
public:
    using Error::Error;
};

class CacheError : public Error {
public:
    using Error::Error;
};

/// Cache belongs to a different generator, sigma, input or classifier state.
class CacheIncompatibleError : public CacheError {
public:
    using CacheError::CacheError;
};

class CorruptCacheError : public CacheError {
public:
    using CacheError::CacheError;
};

class UnsupportedVersionError : public CacheError {
public:
    using CacheError::CacheError;
};

/// Records violate the cache invariants; raised before anything is written.
class CacheValidationError : public CacheError {
public:
    using CacheError::CacheError;
};

class PlanningError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace irs
