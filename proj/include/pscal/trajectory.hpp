#pragma once

#include <filesystem>
#include <optional>
#include <vector>

namespace pscal {

/// Uniformly sampled multi-channel time series. Required channels: terminal
/// voltage magnitude (pu) and unwrapped angle (rad); optional measured or
/// simulated active/reactive power (pu).
struct Trajectory {
    double t0 = 0.0;
    double dt_sample = 0.0;
    std::vector<double> vmag;
    std::vector<double> vang;
    std::optional<std::vector<double>> p;
    std::optional<std::vector<double>> q;

    std::size_t size() const { return vmag.size(); }
    double time_at(std::size_t k) const { return t0 + dt_sample * static_cast<double>(k); }
};

/// Removes 2*pi jumps between adjacent samples (monotone continuation).
std::vector<double> unwrap_angles(std::vector<double> a);

/// Loads a PMU CSV: header `t,vmag,vang` or `t,vmag,vang,p,q`, seconds /
/// per-unit / radians, '.' decimal separator. Validates monotone time,
/// sampling uniformity (within 1% of the median step), positive vmag, and
/// absence of NaN; unwraps the angle channel. Throws ConfigError.
Trajectory load_pmu_csv(const std::filesystem::path& path);

/// Writes the same schema (5 columns when both power channels are present,
/// 3 otherwise).
void save_pmu_csv(const Trajectory& traj, const std::filesystem::path& path);

} // namespace pscal
