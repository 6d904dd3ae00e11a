#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace pscal {

/// One calibratable model parameter. The perturbation range used by data
/// generation and screening is [lower_factor * base, upper_factor * base].
struct ParamEntry {
    std::string name;
    double base = 0.0;
    double lower_factor = 0.5;
    double upper_factor = 2.0;
    std::string unit;
};

/// Ordered set of uniquely named parameters.
class ParameterSet {
public:
    /// Throws ConfigError on duplicate name, non-finite base, or factors
    /// violating 0 < lower <= 1 <= upper.
    void add(ParamEntry entry);

    bool contains(const std::string& name) const;
    const ParamEntry& at(const std::string& name) const;
    const std::vector<ParamEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Subset in the given order; throws if a name is unknown.
    ParameterSet subset(const std::vector<std::string>& names) const;

private:
    std::vector<ParamEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Dotted parameter name -> overriding value.
using ParamAssignment = std::map<std::string, double>;

} // namespace pscal
