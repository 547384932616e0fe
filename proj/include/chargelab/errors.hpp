#pragma once

#include <stdexcept>
#include <string>

namespace chargelab {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A speed reached or exceeded c where a subluminal quantity was required.
/// Superluminal inputs are always hard errors, never clamped.
struct SuperluminalError : Error {
    using Error::Error;
};

/// Field evaluation requested on (or numerically indistinguishable from)
/// a point-charge worldline.
struct SingularityError : Error {
    using Error::Error;
};

/// Invalid configuration: bad constants, malformed scenario files,
/// unknown keys, geometric preconditions violated.
struct ConfigError : Error {
    using Error::Error;
};

/// Evaluation outside the domain where a discrete object is defined,
/// or a domain too small for the requested computation.
struct DomainError : Error {
    using Error::Error;
};

/// A requested tolerance could not be certified (bracket failure,
/// iteration cap, quadrature stagnation, vanishing denominators).
struct AccuracyError : Error {
    using Error::Error;
};

/// Filesystem / serialization failures.
struct IoError : Error {
    using Error::Error;
};

} // namespace chargelab
