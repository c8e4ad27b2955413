#pragma once

#include <stdexcept>
#include <string>

namespace tidecast {

// Base of every exception thrown by the library. The CLI maps the concrete
// subclasses onto its exit codes (usage 1, data 2, numeric 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition or passed an invalid option.
class UsageError : public Error {
public:
    using Error::Error;
};

// Input data could not be read, parsed or validated.
class DataError : public Error {
public:
    using Error::Error;
};

// A computation produced non-finite values.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace tidecast
