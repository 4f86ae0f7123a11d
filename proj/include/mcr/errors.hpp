#pragma once

#include <stdexcept>
#include <string>

namespace mcr {

/// Base class of every error raised by the estimator library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input-shape and contract violations.
class DimensionMismatch : public Error { public: using Error::Error; };
class InvariantViolation : public Error { public: using Error::Error; };
class KMismatch : public Error { public: using Error::Error; };
class ColumnOutOfRange : public Error { public: using Error::Error; };
class MissingLabels : public Error { public: using Error::Error; };
class SchemaMismatch : public Error { public: using Error::Error; };
class EmptyVocabulary : public Error { public: using Error::Error; };

// Numerical failures.
class SingularDesign : public Error { public: using Error::Error; };
class DegenerateWeights : public Error { public: using Error::Error; };
class ZeroVariance : public Error { public: using Error::Error; };

class IoError : public Error { public: using Error::Error; };

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionMismatch(what);
}

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvariantViolation(what);
}

}  // namespace detail
}  // namespace mcr
