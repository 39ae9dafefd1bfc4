#pragma once

#include <stdexcept>
#include <string>

namespace mate {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or block sizes do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// CSV parsing failure; message carries the row/column location.
class IngestError : public Error {
public:
    using Error::Error;
};

/// A feature row cannot be standardized (constant or too few observations).
class DegenerateFeatureError : public Error {
public:
    using Error::Error;
};

/// A root finder or the duality cross-check failed.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Eigensolver failure or spectrum far outside PSD tolerances.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace mate
