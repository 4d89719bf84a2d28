#pragma once

#include <stdexcept>
#include <string>

namespace pqeig {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A scalar parameter lies outside its admissible domain (p <= 1, n < 2, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Two fields were combined that do not live on the same grid.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A field contains non-finite values or has the wrong length.
class InvalidFieldError : public Error {
public:
    using Error::Error;
};

/// Nodal data violates a sign or positivity requirement.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The scale-balancing projection onto the constraint set is undefined.
class ProjectionInfeasible : public Error {
public:
    using Error::Error;
};

class SolverFailed : public Error {
public:
    using Error::Error;
};

class DegenerateAlignment : public Error {
public:
    using Error::Error;
};

/// Inputs of a proof check are not on the constraint set.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class OracleFailed : public Error {
public:
    using Error::Error;
};

/// Configuration text could not be parsed or validated.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace pqeig
