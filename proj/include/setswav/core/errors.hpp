#pragma once

#include <stdexcept>
#include <string>

namespace setswav {

// Error taxonomy maps onto CLI exit codes: ConfigError -> 2, DataError -> 3,
// NumericError -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

#define SETSWAV_DEFINE_ERROR(Name, Base)                          \
    struct Name : Base {                                          \
        explicit Name(const std::string& what)                    \
            : Base(std::string(#Name) + ": " + what) {}           \
    }

SETSWAV_DEFINE_ERROR(MalformedRow, DataError);
SETSWAV_DEFINE_ERROR(EmptyManifest, DataError);
SETSWAV_DEFINE_ERROR(DegenerateBox, DataError);
SETSWAV_DEFINE_ERROR(EmptyPool, DataError);
SETSWAV_DEFINE_ERROR(ZeroVector, DataError);
SETSWAV_DEFINE_ERROR(DimensionMismatch, DataError);
SETSWAV_DEFINE_ERROR(SetTooSmall, DataError);
SETSWAV_DEFINE_ERROR(LabelOutOfRange, DataError);
SETSWAV_DEFINE_ERROR(PriorMismatch, DataError);
SETSWAV_DEFINE_ERROR(VideoMismatch, DataError);
SETSWAV_DEFINE_ERROR(EmptyPilot, DataError);
SETSWAV_DEFINE_ERROR(UnknownVideo, DataError);
SETSWAV_DEFINE_ERROR(VersionMismatch, DataError);
SETSWAV_DEFINE_ERROR(CorruptCheckpoint, DataError);
SETSWAV_DEFINE_ERROR(DegenerateLabels, DataError);
SETSWAV_DEFINE_ERROR(EmptyRegionList, DataError);
SETSWAV_DEFINE_ERROR(SpecInvalid, ConfigError);
SETSWAV_DEFINE_ERROR(NumericalOverflow, NumericError);
SETSWAV_DEFINE_ERROR(DivergenceDetected, NumericError);

#undef SETSWAV_DEFINE_ERROR

}  // namespace setswav
