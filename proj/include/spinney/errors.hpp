#pragma once

#include <stdexcept>
#include <string>

namespace spinney {

// Error taxonomy maps onto the CLI exit-code contract:
//   Config  -> exit 2 (bad input, bad file, bad arguments, misuse)
//   Numeric -> exit 3 (a numeric precondition failed; inputs were well-formed)
enum class ErrorKind { Config, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

#define SPINNEY_ERROR_TYPE(NAME, KIND)                     \
    struct NAME : Error {                                  \
        explicit NAME(const std::string& w)                \
            : Error(ErrorKind::KIND, std::string(#NAME ": ") + w) {} \
    }

SPINNEY_ERROR_TYPE(EmptyStateSpace, Config);
SPINNEY_ERROR_TYPE(RowSumViolation, Config);
SPINNEY_ERROR_TYPE(MissingOffspringLaw, Config);
SPINNEY_ERROR_TYPE(ZeroMeanOffspring, Config);
SPINNEY_ERROR_TYPE(UnknownState, Config);
SPINNEY_ERROR_TYPE(UnknownLabel, Config);
SPINNEY_ERROR_TYPE(DuplicateLabel, Config);
SPINNEY_ERROR_TYPE(DimensionMismatch, Config);
SPINNEY_ERROR_TYPE(NotNormingRegion, Config);
SPINNEY_ERROR_TYPE(NoEntrance, Config);
SPINNEY_ERROR_TYPE(InvalidSpine, Config);
SPINNEY_ERROR_TYPE(ZeroMassState, Config);
SPINNEY_ERROR_TYPE(ZeroEntranceMass, Config);
SPINNEY_ERROR_TYPE(BudgetExceeded, Config);
SPINNEY_ERROR_TYPE(EncodingMismatch, Config);
SPINNEY_ERROR_TYPE(ParseError, Config);
SPINNEY_ERROR_TYPE(IoError, Config);

SPINNEY_ERROR_TYPE(DivergentGreen, Numeric);
SPINNEY_ERROR_TYPE(SolveFailure, Numeric);
SPINNEY_ERROR_TYPE(NotExcessive, Numeric);
SPINNEY_ERROR_TYPE(NotSubMarkovian, Numeric);
SPINNEY_ERROR_TYPE(BackwardNotAlmostSurelyFinite, Numeric);

#undef SPINNEY_ERROR_TYPE

} // namespace spinney
