#pragma once

#include <stdexcept>
#include <string>

namespace cfcast {

/// Base class for all library errors. The concrete subclasses map to the
/// CLI exit codes documented in tools/cfcast.cpp and README.md.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown keys, invalid values, inconsistent options.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Bad input data: schema problems, unparseable rows, invalid series,
/// out-of-range splits, degenerate labels.
class DataError : public Error {
public:
    using Error::Error;
};

/// Model estimation failures: divergence, non-convergence, too little data
/// for the requested model.
class FitError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures: unreadable input, unwritable output directory.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cfcast
