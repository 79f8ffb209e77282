#pragma once

#include <stdexcept>
#include <string>

namespace decake {

// Base of every error thrown by the library. Recoverable task-level outcomes
// (a failed suction seal, a height mismatch) are returned as enums instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define DECAKE_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(const std::string& what) : Error(what) {}    \
    }

DECAKE_DEFINE_ERROR(InvalidPolygon);
DECAKE_DEFINE_ERROR(InvalidGrid);
DECAKE_DEFINE_ERROR(SceneOverflow);
DECAKE_DEFINE_ERROR(NoSuchPart);
DECAKE_DEFINE_ERROR(SensorBusy);
DECAKE_DEFINE_ERROR(ContactFault);
DECAKE_DEFINE_ERROR(ContactLost);
DECAKE_DEFINE_ERROR(DropDuringClean);
DECAKE_DEFINE_ERROR(NotFlippable);
DECAKE_DEFINE_ERROR(PreconditionViolation);
DECAKE_DEFINE_ERROR(InvalidQuery);
DECAKE_DEFINE_ERROR(Unreachable);
DECAKE_DEFINE_ERROR(ConfigError);
DECAKE_DEFINE_ERROR(FormatError);

#undef DECAKE_DEFINE_ERROR

}  // namespace decake
