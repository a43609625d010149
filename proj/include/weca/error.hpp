#pragma once

#include <stdexcept>
#include <string>

namespace weca {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform to an op's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A forward value left the finite range (NaN/Inf) or would overflow.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Input data (CSV, series, splits) violates its contract.
class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised when training produces a non-finite loss or gradient.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int last_good_epoch)
        : Error(what), last_good_epoch_(last_good_epoch) {}
    int last_good_epoch() const noexcept { return last_good_epoch_; }

private:
    int last_good_epoch_;
};

}  // namespace weca
