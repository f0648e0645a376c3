#pragma once

#include <stdexcept>
#include <string>

namespace fembem {

// One exception type per failure category; callers usually catch the base.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct StructuralError : Error { using Error::Error; };
struct GeometryError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct SolverError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
struct EstimatorError : Error { using Error::Error; };
struct InternalError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };

}  // namespace fembem
