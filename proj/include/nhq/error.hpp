#pragma once

#include <stdexcept>
#include <string>

namespace nhq {

// Base of every library failure. name() is the stable diagnostic token the
// CLI prints; what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& detail)
      : std::runtime_error(detail), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define NHQ_DEFINE_ERROR(Type)                                   \
  class Type : public Error {                                    \
   public:                                                       \
    explicit Type(const std::string& detail) : Error(#Type, detail) {} \
  };

NHQ_DEFINE_ERROR(InvalidArgument)
NHQ_DEFINE_ERROR(ShapeMismatch)
NHQ_DEFINE_ERROR(NonFinite)
NHQ_DEFINE_ERROR(NonConvergence)
NHQ_DEFINE_ERROR(OverflowRisk)
NHQ_DEFINE_ERROR(DimensionOverflow)
NHQ_DEFINE_ERROR(Overflow)
NHQ_DEFINE_ERROR(PositivityViolation)
NHQ_DEFINE_ERROR(StepTooLarge)
NHQ_DEFINE_ERROR(NoMinimum)
NHQ_DEFINE_ERROR(TruncationDominates)
NHQ_DEFINE_ERROR(ParseError)
NHQ_DEFINE_ERROR(ValidationError)
NHQ_DEFINE_ERROR(IoError)

#undef NHQ_DEFINE_ERROR

}  // namespace nhq
