#pragma once

#include <stdexcept>
#include <string>

namespace hwi {

// Exception families map onto CLI exit codes (2 usage, 3 data, 4 numerical).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace hwi
