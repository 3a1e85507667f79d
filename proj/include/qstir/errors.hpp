// errors.hpp: exception types raised by the engine.
//
// Every failure carries a short kind tag; the CLI maps ConfigError to exit 2
// and every NumericalError to exit 3.

#pragma once

#include <stdexcept>
#include <string>

namespace qstir {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration or input-validation failure (bad keys, invalid bond, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Failure of a numerical precondition or postcondition.
class NumericalError : public Error {
public:
    using Error::Error;
};

#define QSTIR_DEFINE_ERROR(Name, Base)                                      \
    class Name : public Base {                                              \
    public:                                                                 \
        explicit Name(const std::string& what) : Base(#Name ": " + what) {} \
    };

QSTIR_DEFINE_ERROR(NonHermitian, NumericalError)
QSTIR_DEFINE_ERROR(TimeOutOfRange, ConfigError)
QSTIR_DEFINE_ERROR(InvalidBond, ConfigError)
QSTIR_DEFINE_ERROR(DegenerateSplit, NumericalError)
QSTIR_DEFINE_ERROR(NoCrossing, NumericalError)
QSTIR_DEFINE_ERROR(StepUnderflow, NumericalError)
QSTIR_DEFINE_ERROR(BranchAmbiguity, NumericalError)
QSTIR_DEFINE_ERROR(ReductionInvalid, NumericalError)
QSTIR_DEFINE_ERROR(UnnormalizedState, NumericalError)
QSTIR_DEFINE_ERROR(GridTooCoarse, NumericalError)
QSTIR_DEFINE_ERROR(OutOfRange, NumericalError)

#undef QSTIR_DEFINE_ERROR

}  // namespace qstir
