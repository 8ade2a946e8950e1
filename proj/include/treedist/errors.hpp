#pragma once

#include <stdexcept>
#include <string>

namespace treedist {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad structure, negative mass, invalid index, dimension mismatch.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A linear or transportation program with an empty feasible set.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

class StageMismatchError : public Error {
public:
    using Error::Error;
};

/// Monolithic LP would exceed the configured leaf-pair cap.
class SizeCapError : public Error {
public:
    using Error::Error;
};

/// Conditioning on a node of probability zero.
class ConditioningError : public Error {
public:
    using Error::Error;
};

}  // namespace treedist
