#pragma once

#include <stdexcept>
#include <string>

namespace itin {

/// Bad argument values: non-finite entries, dimension mismatches, out-of-range
/// parameters.
struct InvalidInput : std::invalid_argument {
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// An operation that needs at least one data point received none.
struct EmptyData : std::invalid_argument {
    explicit EmptyData(const std::string& what) : std::invalid_argument(what) {}
};

/// A Jacobian that must be inverted is rank-deficient at the working tolerance.
struct SingularJacobian : std::runtime_error {
    explicit SingularJacobian(const std::string& what) : std::runtime_error(what) {}
};

/// Sampled secant slopes change sign: the map is not strictly monotone.
struct NotMonotone : std::runtime_error {
    explicit NotMonotone(const std::string& what) : std::runtime_error(what) {}
};

/// A stated precondition of a certification routine does not hold for the
/// supplied instance.
struct PreconditionFailed : std::runtime_error {
    explicit PreconditionFailed(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace itin
