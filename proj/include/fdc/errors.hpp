#pragma once

#include <stdexcept>
#include <string>

namespace fdc {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Raised when the flight equations hit a cos(theta), cos(beta) or V ~ 0 point.
class SingularityError : public Error {
public:
    SingularityError(const std::string& what, double time_s)
        : Error(what), time_s_(time_s) {}
    double time() const noexcept { return time_s_; }

private:
    double time_s_;
};

class RangeError : public Error {
public:
    using Error::Error;
};

// Malformed or incompatible binary/JSON container.
class FormatError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace fdc
