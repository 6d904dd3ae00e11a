#include "pscal/params.hpp"

#include <cmath>

#include "pscal/common.hpp"

namespace pscal {

void ParameterSet::add(ParamEntry entry) {
    if (entry.name.empty())
        throw ConfigError("parameter set: empty name");
    if (index_.count(entry.name))
        throw ConfigError("parameter set: duplicate name '" + entry.name + "'");
    if (!std::isfinite(entry.base))
        throw ConfigError("parameter set: non-finite base value for '" + entry.name + "'");
    if (!(entry.lower_factor > 0.0 && entry.lower_factor <= 1.0 &&
          entry.upper_factor >= 1.0 && std::isfinite(entry.upper_factor)))
        throw ConfigError("parameter set: factors for '" + entry.name +
                          "' must satisfy 0 < lower <= 1 <= upper");
    index_[entry.name] = entries_.size();
    entries_.push_back(std::move(entry));
}

bool ParameterSet::contains(const std::string& name) const {
    return index_.count(name) != 0;
}

const ParamEntry& ParameterSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw ConfigError("parameter set: unknown name '" + name + "'");
    return entries_[it->second];
}

ParameterSet ParameterSet::subset(const std::vector<std::string>& names) const {
    ParameterSet out;
    for (const auto& n : names) out.add(at(n));
    return out;
}

} // namespace pscal
