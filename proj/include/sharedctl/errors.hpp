#pragma once

#include <stdexcept>
#include <string>

namespace sharedctl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model, automaton or strategy file violates a load-time invariant.
class ModelError : public Error {
public:
    using Error::Error;
};

class StrategyMismatch : public Error {
public:
    using Error::Error;
};

class DivergentCost : public Error {
public:
    using Error::Error;
};

class UnknownAp : public Error {
public:
    using Error::Error;
};

class NumericalBreakdown : public Error {
public:
    using Error::Error;
};

class InfeasibleModel : public Error {
public:
    using Error::Error;
};

/// No strategy reaches the requested threshold; carries the best achievable
/// value, or NaN when the extra constraints alone are unsatisfiable.
class SpecInfeasible : public Error {
public:
    SpecInfeasible(const std::string& what, double achievable)
        : Error(what), achievable_(achievable) {}

    double achievable() const noexcept { return achievable_; }

private:
    double achievable_;
};

class DegenerateBlend : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace sharedctl
