#pragma once

#include <stdexcept>
#include <string>

namespace kkreg {

//! Malformed or inconsistent input data (bad CSV, dimension or grid mismatch).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

//! A computation produced a non-finite or otherwise unusable result.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace kkreg
