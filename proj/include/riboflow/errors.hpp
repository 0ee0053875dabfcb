#pragma once

#include <stdexcept>
#include <string>

namespace riboflow {

// Error taxonomy mirrored by the CLI exit codes:
//   2 parse, 3 validation, 4 numeric failure, 5 budget exceeded.
enum class ErrorClass { parse = 2, validation = 3, numeric = 4, budget = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const { return cls_; }
    int exit_code() const { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(ErrorClass::parse, what) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorClass::validation, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorClass::numeric, what) {}
};

class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& what) : Error(ErrorClass::budget, what) {}
};

// Validation conditions
struct LoopEdge : ValidationError { using ValidationError::ValidationError; };
struct DuplicateEdge : ValidationError { using ValidationError::ValidationError; };
struct BadCapacity : ValidationError { using ValidationError::ValidationError; };
struct IndexOutOfRange : ValidationError { using ValidationError::ValidationError; };
struct BadParameter : ValidationError { using ValidationError::ValidationError; };
struct BadReference : ValidationError { using ValidationError::ValidationError; };
struct MixedPeriods : ValidationError { using ValidationError::ValidationError; };
struct LevelSetMismatch : ValidationError { using ValidationError::ValidationError; };

// Numeric conditions
struct StepSizeUnderflow : NumericError { using NumericError::NumericError; };
struct CapacityViolation : NumericError { using NumericError::NumericError; };
struct NonFiniteState : NumericError { using NumericError::NumericError; };
struct NonFiniteInput : NumericError { using NumericError::NumericError; };
struct NoConvergence : NumericError { using NumericError::NumericError; };
struct QuadratureFailure : NumericError { using NumericError::NumericError; };
struct UnboundedCoefficient : NumericError { using NumericError::NumericError; };
struct EmptyWindow : NumericError { using NumericError::NumericError; };
struct NotStronglyConnected : NumericError { using NumericError::NumericError; };

// Budget conditions
struct CycleBudgetExceeded : BudgetError { using BudgetError::BudgetError; };
struct TooLarge : BudgetError { using BudgetError::BudgetError; };

} // namespace riboflow
