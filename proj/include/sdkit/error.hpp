#pragma once

#include <stdexcept>
#include <string>

namespace sdkit {

/// Base of every exception thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sdkit
