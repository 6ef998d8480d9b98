#pragma once

#include <stdexcept>
#include <string>

namespace gelstep {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

class NonpositiveDeterminant : public Error {
public:
    using Error::Error;
};

class NotMeanFree : public Error {
public:
    using Error::Error;
};

class SolverStagnation : public Error {
public:
    using Error::Error;
};

class InfiniteEnergy : public Error {
public:
    using Error::Error;
};

class MassMismatch : public Error {
public:
    using Error::Error;
};

class LineSearchFailure : public Error {
public:
    using Error::Error;
};

class IterationBudgetExceeded : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

/// Wraps an error raised while computing time step `step` of a run.
class StepError : public Error {
public:
    StepError(int step, const std::string& what)
        : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace gelstep
