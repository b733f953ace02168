#pragma once

#include <stdexcept>
#include <string>

namespace kinetic {

/// Base of every error raised by the library. `kind()` is the stable name used
/// by the CLI diagnostics and the summary documents.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define KINETIC_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

// Input errors: the request itself is malformed.
KINETIC_DEFINE_ERROR(ParseError);
KINETIC_DEFINE_ERROR(SchemaError);
KINETIC_DEFINE_ERROR(DomainError);
KINETIC_DEFINE_ERROR(InsufficientSmoothness);
KINETIC_DEFINE_ERROR(MissingGibbsForm);
KINETIC_DEFINE_ERROR(UnknownExample);
KINETIC_DEFINE_ERROR(ParameterOutOfRange);
KINETIC_DEFINE_ERROR(ShapeError);
KINETIC_DEFINE_ERROR(PreconditionViolated);
KINETIC_DEFINE_ERROR(OrderTooLow);
KINETIC_DEFINE_ERROR(NonEllipticCoefficient);
KINETIC_DEFINE_ERROR(UnsupportedTensor);
KINETIC_DEFINE_ERROR(TimeError);
KINETIC_DEFINE_ERROR(SpectrumError);
KINETIC_DEFINE_ERROR(NonSmoothH);
KINETIC_DEFINE_ERROR(EmptyEnsemble);

// Mathematical outcomes: the input was well formed but the object does not
// have the requested property.
KINETIC_DEFINE_ERROR(NoViolationAtPoint);
KINETIC_DEFINE_ERROR(NoInvariantDensity);
KINETIC_DEFINE_ERROR(SupportViolation);
KINETIC_DEFINE_ERROR(TruncationBudgetExceeded);

#undef KINETIC_DEFINE_ERROR

}  // namespace kinetic
