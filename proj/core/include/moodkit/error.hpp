#ifndef MOODKIT_ERROR_HPP
#define MOODKIT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace moodkit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument values: out-of-range labels, bad hyperparameters, malformed config.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Shape or alignment mismatch between containers that must agree.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Operation called before its required state was established (e.g. score before fit).
class StateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: singular matrices, non-finite losses.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Process exit codes used by the CLI; stable contract.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitIo = 3,
    kExitNumerical = 4,
};

}  // namespace moodkit

#endif  // MOODKIT_ERROR_HPP
