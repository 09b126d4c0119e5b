#pragma once

#include <stdexcept>
#include <string>

namespace anosov {

/// Coarse failure classes; the lab runner maps them onto exit codes.
enum class ErrorClass { Config, Construction, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define ANOSOV_DEFINE_ERROR(Name, Class)                                          \
  class Name : public Error {                                                    \
   public:                                                                       \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {}   \
  };

ANOSOV_DEFINE_ERROR(ConfigError, Config)
ANOSOV_DEFINE_ERROR(OutOfDomain, Numerical)
ANOSOV_DEFINE_ERROR(NotPositiveDefinite, Construction)
ANOSOV_DEFINE_ERROR(NoOverlap, Numerical)
ANOSOV_DEFINE_ERROR(DomainEscape, Numerical)
ANOSOV_DEFINE_ERROR(StepFailure, Numerical)
ANOSOV_DEFINE_ERROR(DegenerateCone, Numerical)
ANOSOV_DEFINE_ERROR(SingularMatrix, Numerical)
ANOSOV_DEFINE_ERROR(InfeasibleProfile, Construction)
ANOSOV_DEFINE_ERROR(NonPeriodic, Construction)
ANOSOV_DEFINE_ERROR(InvalidArgument, Construction)

#undef ANOSOV_DEFINE_ERROR

}  // namespace anosov
