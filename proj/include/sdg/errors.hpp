#pragma once

#include <stdexcept>
#include <string>

namespace sdg {

// Base class for all library errors. Everything thrown on purpose derives
// from this so callers can catch one type at the API boundary.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A coefficient or payoff evaluator produced a non-finite value, or was
// handed arguments outside its declared domain.
class EvaluationError : public Error {
public:
    using Error::Error;
};

// A strategy violated one of its structural invariants at run time
// (non-monotone stopping rules, action requested at or before the start
// rule, control set mismatch between paired objects).
class StrategyError : public Error {
public:
    using Error::Error;
};

// State left the overflow guard during simulation.
class ExplosionError : public Error {
public:
    using Error::Error;
};

// Grid construction or stepping would violate the explicit-scheme
// stability bound, or a scheme weight went negative.
class CflError : public Error {
public:
    using Error::Error;
};

// A declarative config failed validation. The message carries the
// offending field path.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A verification routine was called with inputs that violate its stated
// preconditions (mismatched grids, missing response-table entries,
// an ordering assumption that fails on sampled data).
class PreconditionError : public Error {
public:
    using Error::Error;
};

}  // namespace sdg
