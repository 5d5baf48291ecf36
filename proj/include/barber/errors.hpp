#pragma once

#include <stdexcept>
#include <string>

namespace barber {

// Error taxonomy used across the library. The CLI maps these to exit codes:
// input/usage -> 2, shape/format/internal -> 3, numeric -> 4.

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct internal_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace barber
