#include "pscal/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "pscal/parallel.hpp"

namespace pscal {

double sensitivity_from_responses(std::span<const double> r_plus,
                                  std::span<const double> r_minus, double p0, double dp) {
    if (r_plus.size() != r_minus.size() || r_plus.empty())
        throw ConfigError("sensitivity: response vectors must be non-empty and equal length");
    if (!(dp > 0.0)) throw ConfigError("sensitivity: perturbation must be positive");
    double acc = 0.0;
    for (std::size_t k = 0; k < r_plus.size(); ++k)
        acc += std::fabs((r_plus[k] - r_minus[k]) / dp);
    return p0 / (2.0 * static_cast<double>(r_plus.size())) * acc;
}

namespace {

std::vector<double> response_of(const ModelConfig& cfg, const Trajectory& event,
                                const std::string& name, double value,
                                const PlaybackOptions& opt) {
    Trajectory sim = playback(cfg, {{name, value}}, event, opt);
    std::vector<double> r;
    r.reserve(2 * sim.size());
    r.insert(r.end(), sim.p->begin(), sim.p->end());
    r.insert(r.end(), sim.q->begin(), sim.q->end());
    return r;
}

} // namespace

double sensitivity_of(const ModelConfig& cfg, const Trajectory& event,
                      const std::string& name, double delta_fraction,
                      const PlaybackOptions& opt) {
    if (!(delta_fraction > 0.0 && delta_fraction <= 0.5))
        throw ConfigError("sensitivity: delta_fraction must lie in (0, 0.5]");
    const double p0 = cfg.value_of(name);
    if (p0 == 0.0)
        throw ConfigError("sensitivity: parameter '" + name +
                          "' has zero base value and is unscreenable");
    const double dp = delta_fraction * std::fabs(p0);
    const auto r_plus = response_of(cfg, event, name, p0 + dp, opt);
    const auto r_minus = response_of(cfg, event, name, p0 - dp, opt);
    return sensitivity_from_responses(r_plus, r_minus, p0, dp);
}

SensitivityResult rank_parameters(const ModelConfig& cfg, const Trajectory& event,
                                  const ParameterSet& params, const SensitivityOptions& opt) {
    if (params.empty()) throw ConfigError("rank_parameters: empty parameter set");
    if (!(opt.keep_ratio > 0.0 && opt.keep_ratio < 1.0))
        throw ConfigError("rank_parameters: keep_ratio must lie in (0, 1)");

    SensitivityResult out;
    out.delta_fraction = opt.delta_fraction;

    std::vector<const ParamEntry*> screenable;
    for (const auto& e : params.entries()) {
        if (e.base == 0.0)
            out.unscreenable.push_back(e.name);
        else
            screenable.push_back(&e);
    }

    std::vector<SensitivityResult::Item> items(screenable.size());
    parallel_for(screenable.size(), opt.workers, [&](std::size_t i) {
        const auto& e = *screenable[i];
        items[i] = {e.name, sensitivity_of(cfg, event, e.name, opt.delta_fraction, opt.playback),
                    e.base};
    });

    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.s != b.s) return a.s > b.s;
        return a.name < b.name;
    });
    out.results = std::move(items);

    double s_max = 0.0;
    for (const auto& it : out.results) s_max = std::max(s_max, it.s);
    const double threshold = opt.keep_ratio * s_max;
    for (const auto& it : out.results)
        if (it.s >= threshold) out.selected.push_back(it.name);
    return out;
}

nlohmann::json to_json(const SensitivityResult& r) {
    nlohmann::json j;
    j["delta_fraction"] = r.delta_fraction;
    j["results"] = nlohmann::json::array();
    for (const auto& it : r.results)
        j["results"].push_back({{"name", it.name}, {"S", it.s}, {"p0", it.p0}});
    j["selected"] = r.selected;
    j["unscreenable"] = r.unscreenable;
    return j;
}

SensitivityResult sensitivity_from_json(const nlohmann::json& j) {
    SensitivityResult r;
    r.delta_fraction = j.at("delta_fraction").get<double>();
    for (const auto& e : j.at("results"))
        r.results.push_back({e.at("name").get<std::string>(), e.at("S").get<double>(),
                             e.at("p0").get<double>()});
    r.selected = j.at("selected").get<std::vector<std::string>>();
    r.unscreenable = j.at("unscreenable").get<std::vector<std::string>>();
    return r;
}

} // namespace pscal
