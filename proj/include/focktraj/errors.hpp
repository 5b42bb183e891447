// errors.hpp — Exception hierarchy shared by all modules

#pragma once

#include <stdexcept>
#include <string>

namespace focktraj {

// Bad user input: malformed scenario, invalid operator, broken precondition.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParameterError : ValidationError {
    explicit ParameterError(const std::string& msg) : ValidationError(msg) {}
};

// Numerical trouble at run time: step-size violations, trace drift,
// consistency checks that exceeded tolerance.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StepSizeError : NumericalError {
    explicit StepSizeError(const std::string& msg) : NumericalError(msg) {}
};

// Time-bin resolution of the joint-state engine is too coarse.
struct ResolutionError : NumericalError {
    explicit ResolutionError(const std::string& msg) : NumericalError(msg) {}
};

// A replayed record asks for an outcome of (numerically) zero probability.
struct InfeasibleRecordError : std::runtime_error {
    explicit InfeasibleRecordError(const std::string& msg) : std::runtime_error(msg) {}
};

// Stable process exit codes for the CLI.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_validation = 2,
    exit_numerical = 3,
    exit_infeasible_record = 4,
};

} // namespace focktraj
