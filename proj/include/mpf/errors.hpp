#pragma once

#include <stdexcept>
#include <string>

namespace mpf {

// Base class for all library errors. Specific conditions get their own type
// so callers can distinguish recoverable situations (e.g. convergence
// failures that trigger the persistence fallback) from hard input errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

// core-data
class MissingBase : public DataError { public: using DataError::DataError; };
class NonPositiveBase : public DataError { public: using DataError::DataError; };
class MisalignedAxis : public DataError { public: using DataError::DataError; };
class NonPositiveCci : public DataError { public: using DataError::DataError; };
class EmptyInput : public DataError { public: using DataError::DataError; };
class TooShort : public DataError { public: using DataError::DataError; };
class SchemaError : public DataError { public: using DataError::DataError; };
class DuplicateKey : public DataError { public: using DataError::DataError; };
class NonContiguousAxis : public DataError { public: using DataError::DataError; };

// features
class NonPositiveValue : public DataError { public: using DataError::DataError; };
class EmptyCluster : public DataError { public: using DataError::DataError; };
class InsufficientHistory : public DataError { public: using DataError::DataError; };

// models
class InvalidConfig : public ConfigError { public: using ConfigError::ConfigError; };
class ShapeMismatch : public Error { public: using Error::Error; };
class ConvergenceFailure : public Error { public: using Error::Error; };
class NotConverged : public Error { public: using Error::Error; };
class NearSingular : public Error { public: using Error::Error; };
class NonFiniteLoss : public Error { public: using Error::Error; };

// evaluation / diagnostics
class ZeroVariance : public DataError { public: using DataError::DataError; };
class DegenerateVariance : public DataError { public: using DataError::DataError; };
class TooFewRows : public DataError { public: using DataError::DataError; };
class MissingArtifact : public DataError { public: using DataError::DataError; };

}  // namespace mpf
