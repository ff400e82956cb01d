#pragma once

#include <stdexcept>
#include <string>

namespace afrclip {

// Error taxonomy used across the toolkit. The CLI maps these onto exit
// codes: IoError -> 1, ConfigError/ProtocolError/ShapeError -> 2,
// NumericError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Cross-dataset protocol violation (train and test dataset ids collide).
struct ProtocolError : Error {
    using Error::Error;
};

// Dimension / shape contract violations.
struct ShapeError : Error {
    using Error::Error;
};

// Degenerate numeric input (zero-norm vector, NaN loss, ...).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace afrclip
