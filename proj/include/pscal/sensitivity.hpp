#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pscal/playback.hpp"

namespace pscal {

/// Average absolute central-difference response to a relative parameter
/// perturbation, scaled by the base value:
///   S = (p0 / 2m) * sum_k |(r_k(p0 + dp) - r_k(p0 - dp)) / dp|
/// where r is the response vector and m its length.
double sensitivity_from_responses(std::span<const double> r_plus,
                                  std::span<const double> r_minus, double p0, double dp);

/// Screens one parameter by running two playbacks at p0 * (1 +- delta) and
/// comparing the simulated P and Q channels (concatenated response).
/// delta_fraction must lie in (0, 0.5]; a zero base value is unscreenable
/// and reported as an error rather than perturbed absolutely.
double sensitivity_of(const ModelConfig& cfg, const Trajectory& event,
                      const std::string& name, double delta_fraction,
                      const PlaybackOptions& opt = {});

struct SensitivityOptions {
    double delta_fraction = 0.02;
    double keep_ratio = 0.05;
    unsigned workers = 1;
    PlaybackOptions playback;
};

struct SensitivityResult {
    struct Item {
        std::string name;
        double s = 0.0;
        double p0 = 0.0;
    };
    double delta_fraction = 0.0;
    std::vector<Item> results;              // descending by S, ties by name
    std::vector<std::string> selected;      // S >= keep_ratio * max(S)
    std::vector<std::string> unscreenable;  // zero base values, not ranked
};

/// Evaluates S for every entry of the parameter set (parallel across
/// parameters, merged deterministically) and selects the names whose
/// sensitivity reaches keep_ratio of the maximum.
SensitivityResult rank_parameters(const ModelConfig& cfg, const Trajectory& event,
                                  const ParameterSet& params,
                                  const SensitivityOptions& opt = {});

nlohmann::json to_json(const SensitivityResult& r);
SensitivityResult sensitivity_from_json(const nlohmann::json& j);

} // namespace pscal
