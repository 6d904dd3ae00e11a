#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pscal {

/// Malformed configuration, schema violation, or missing input file.
/// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Simulation failure (divergence, non-convergent solve). CLI exit code 3.
struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to exactly the same double.
std::string fmt_double(double x);

bool all_finite(const std::vector<double>& v);

} // namespace pscal
