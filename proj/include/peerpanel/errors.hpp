#pragma once

#include <stdexcept>
#include <string>

namespace peerpanel {

// Every failure raised by the library derives from Error, so callers that
// only care about "something went wrong" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PEERPANEL_ERROR(Name)                   \
  class Name : public Error {                   \
   public:                                      \
    explicit Name(const std::string& what)      \
        : Error(std::string(#Name ": ") + what) \
    {}                                          \
  }

PEERPANEL_ERROR(EmptyInput);
PEERPANEL_ERROR(DuplicateObservation);
PEERPANEL_ERROR(InvalidPanel);
PEERPANEL_ERROR(DimensionMismatch);
PEERPANEL_ERROR(SpectralRadiusViolation);
PEERPANEL_ERROR(NonFinite);
PEERPANEL_ERROR(AssumptionViolation);
PEERPANEL_ERROR(ShapeMismatch);
PEERPANEL_ERROR(WrongNetworkKind);
PEERPANEL_ERROR(NotIdentifiedRefusal);
PEERPANEL_ERROR(DegenerateN);
PEERPANEL_ERROR(SingularDesign);
PEERPANEL_ERROR(ConfigViolation);
PEERPANEL_ERROR(EmptyGroup);
PEERPANEL_ERROR(ParseError);
PEERPANEL_ERROR(IoError);

#undef PEERPANEL_ERROR

}  // namespace peerpanel
