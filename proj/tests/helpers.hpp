#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "pscal/trajectory.hpp"
#include "pscal/unit_model.hpp"

namespace testutil {

/// Default unit configuration used across the tests (Table-style values for
/// the four calibrated gains, textbook round-rotor machine constants).
inline nlohmann::json default_model_json() {
    return nlohmann::json::parse(R"({
      "machine": {
        "h": 4.60, "d": 0.0,
        "xd": 1.81, "xq": 1.76, "xdp": 0.30, "xqp": 0.65, "xdpp": 0.23, "xl": 0.16,
        "td0p": 8.0, "tq0p": 1.0, "td0pp": 0.03, "tq0pp": 0.07
      },
      "exciter": { "ka": 250.0, "ta": 0.04, "tb": 43.0, "tc": 1.0 },
      "governor": { "ks": 36.0, "r": 0.05, "tg": 0.5 },
      "stabilizer": {
        "enabled": true, "kpss": 3.0, "tw": 10.0,
        "t1": 0.20, "t2": 0.05, "t3": 0.20, "t4": 0.05
      },
      "operating_point": { "p": 0.8, "q": 0.2 }
    })");
}

inline pscal::ModelConfig default_config() {
    return pscal::ModelConfig::from_json(default_model_json());
}

/// Classical-machine limit: every reactance equal, no transient saliency.
inline pscal::ModelConfig classical_config() {
    auto j = default_model_json();
    j["machine"]["xd"] = 0.2;
    j["machine"]["xq"] = 0.2;
    j["machine"]["xdp"] = 0.2;
    j["machine"]["xqp"] = 0.2;
    j["machine"]["xdpp"] = 0.2;
    j["machine"]["xl"] = 0.1;
    return pscal::ModelConfig::from_json(j);
}

/// Constant-voltage drive (vmag = 1, vang = 0), no measured power.
inline pscal::Trajectory constant_event(double seconds, double hz = 30.0) {
    pscal::Trajectory t;
    t.t0 = 0.0;
    t.dt_sample = 1.0 / hz;
    const auto m = static_cast<std::size_t>(seconds * hz) + 1;
    t.vmag.assign(m, 1.0);
    t.vang.assign(m, 0.0);
    return t;
}

/// Voltage-magnitude step of the given fraction at t = step_time.
inline pscal::Trajectory step_event(double seconds, double step_fraction,
                                    double step_time = 1.0, double hz = 30.0) {
    pscal::Trajectory t = constant_event(seconds, hz);
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t.time_at(k) >= step_time) t.vmag[k] = 1.0 + step_fraction;
    return t;
}

/// Fresh scratch directory under the current working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::current_path() / ("scratch_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testutil
