#ifndef DTREG_ERRORS_HPP
#define DTREG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dtreg {

// Base for everything this library throws. Two branches: DataError for
// invalid inputs/files (CLI exit code 2), NumericalError for failures that
// arise during computation (CLI exit code 3).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

#define DTREG_DEFINE_DATA_ERROR(Name)                                      \
    class Name : public DataError {                                        \
    public:                                                                \
        explicit Name(const std::string& msg) : DataError(#Name ": " + msg) {} \
    }

#define DTREG_DEFINE_NUMERICAL_ERROR(Name)                                 \
    class Name : public NumericalError {                                   \
    public:                                                                \
        explicit Name(const std::string& msg)                              \
            : NumericalError(#Name ": " + msg) {}                          \
    }

// grid / pyramid
DTREG_DEFINE_DATA_ERROR(DimensionTooSmall);

// edt
DTREG_DEFINE_DATA_ERROR(EmptyBackground);
DTREG_DEFINE_DATA_ERROR(EmptyForeground);
DTREG_DEFINE_DATA_ERROR(GridTooLarge);

// transform
DTREG_DEFINE_DATA_ERROR(NonOrientationPreserving);
DTREG_DEFINE_DATA_ERROR(ExtentMismatch);

// objective
DTREG_DEFINE_DATA_ERROR(GridMismatch);

// solver
DTREG_DEFINE_NUMERICAL_ERROR(NonFiniteObjective);

// metrics
DTREG_DEFINE_DATA_ERROR(NoCommonLandmarks);

// io
DTREG_DEFINE_DATA_ERROR(MissingKey);
DTREG_DEFINE_DATA_ERROR(UnsupportedElementType);
DTREG_DEFINE_DATA_ERROR(PayloadSizeMismatch);
DTREG_DEFINE_DATA_ERROR(NonOrthonormalDirection);
DTREG_DEFINE_DATA_ERROR(DuplicateId);
DTREG_DEFINE_DATA_ERROR(MalformedLine);
DTREG_DEFINE_DATA_ERROR(WrongCount);
DTREG_DEFINE_DATA_ERROR(BadBottomRow);
DTREG_DEFINE_DATA_ERROR(FileError);

#undef DTREG_DEFINE_DATA_ERROR
#undef DTREG_DEFINE_NUMERICAL_ERROR

} // namespace dtreg

#endif
