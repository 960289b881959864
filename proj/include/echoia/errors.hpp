#pragma once

#include <stdexcept>
#include <string>

namespace echoia {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define ECHOIA_DEFINE_ERROR(Name)                                              \
    struct Name : Error {                                                      \
        explicit Name(const std::string& what = #Name) : Error(what) {}        \
    }

// feature model / adaptation
ECHOIA_DEFINE_ERROR(MalformedRanking);
ECHOIA_DEFINE_ERROR(WrongEventKind);
ECHOIA_DEFINE_ERROR(ChallengeAlreadyPending);

// classifier
ECHOIA_DEFINE_ERROR(EmptyTrainingSet);
ECHOIA_DEFINE_ERROR(SingleClassTraining);
ECHOIA_DEFINE_ERROR(LayoutMismatch);
ECHOIA_DEFINE_ERROR(InsufficientData);

// authenticator
ECHOIA_DEFINE_ERROR(EmptyWindow);
ECHOIA_DEFINE_ERROR(NotLocked);

// service / store
ECHOIA_DEFINE_ERROR(TimestampRegression);
ECHOIA_DEFINE_ERROR(UnhashedSensitiveField);
ECHOIA_DEFINE_ERROR(UnknownDevice);
ECHOIA_DEFINE_ERROR(ProtocolViolation);
ECHOIA_DEFINE_ERROR(MalformedPayload);

// evaluation / config
ECHOIA_DEFINE_ERROR(EmptyCounts);
ECHOIA_DEFINE_ERROR(ConfigError);

#undef ECHOIA_DEFINE_ERROR

} // namespace echoia
