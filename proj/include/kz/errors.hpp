#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kz {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed user input: permutations, families, CLI configuration.
class InvalidInput : public Error {
public:
    using Error::Error;
};

class NotBijection : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class Reducible : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Base of the errors that abort a dynamical run (CLI exit code 3).
class DynamicsAbort : public Error {
public:
    using Error::Error;
};

/// Equal competing lengths in an induction step.
class Tie : public DynamicsAbort {
public:
    Tie(const std::string& what, std::uint64_t step) : DynamicsAbort(what), step_(step) {}
    std::uint64_t step() const noexcept { return step_; }

private:
    std::uint64_t step_;
};

/// An orbit landed exactly on an interior breakpoint.
class HitDiscontinuity : public DynamicsAbort {
public:
    HitDiscontinuity(const std::string& what, std::uint64_t iterate)
        : DynamicsAbort(what), iterate_(iterate) {}
    std::uint64_t iterate() const noexcept { return iterate_; }

private:
    std::uint64_t iterate_;
};

/// Evaluation at a breakpoint under the strict (non right-continuous) convention.
class OnDiscontinuity : public DynamicsAbort {
public:
    using DynamicsAbort::DynamicsAbort;
};

/// A renormalized length fell below 1e-3 machine epsilon.
class DegenerateLengths : public DynamicsAbort {
public:
    using DynamicsAbort::DynamicsAbort;
};

/// Numerical estimate failed its caller-set accuracy bound (CLI exit code 2).
class NumericalFailure : public Error {
public:
    using Error::Error;
};

class NonConvergence : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class WindowTooShort : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class IllConditioned : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class SingularGram : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// An eigenvalue of the Hermitian form exceeded 1 by more than the quadrature tolerance allows.
class LambdaOvershoot : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class SpuriousZeroAtPuncture : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

}  // namespace kz
