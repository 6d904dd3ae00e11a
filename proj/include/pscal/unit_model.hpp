#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pscal/blocks.hpp"
#include "pscal/common.hpp"
#include "pscal/params.hpp"

namespace pscal {

/// Round-rotor synchronous machine constants (per unit on system base,
/// time constants in seconds).
struct MachineParams {
    double h = 4.60;    // inertia, s
    double d = 0.0;     // mechanical damping, pu
    double xd = 1.81, xq = 1.76;
    double xdp = 0.30, xqp = 0.65;
    double xdpp = 0.23; // = x''q
    double xl = 0.16;
    double td0p = 8.0, tq0p = 1.0;
    double td0pp = 0.03, tq0pp = 0.07;
    double sat_a = 0.0, sat_b = 0.0; // quadratic saturation, disabled by default
};

/// Static exciter: (Vref - Vt + Vs) -> lead-lag (Tc, Tb) -> Ka/(1+s Ta)
/// with anti-windup field-voltage limits.
struct ExciterParams {
    double ka = 250.0;
    double ta = 0.04;
    double tb = 43.0;
    double tc = 1.0;
    double efd_min = -6.0, efd_max = 6.0;
};

/// Proportional governor with permanent droop through the actuator:
///   u = Pset + Ks * (-dOmega - R * (Pm - Pset)),  dPm/dt = (u - Pm)/Tg
struct GovernorParams {
    double ks = 36.0;
    double r = 0.05;
    double tg = 0.5;
    double pm_min = 0.0, pm_max = 1.5;
};

/// Speed-input stabilizer: washout -> gain -> two lead-lags -> clamp.
struct StabilizerParams {
    bool enabled = true;
    double kpss = 3.0;
    double tw = 10.0;
    double t1 = 0.20, t2 = 0.05;
    double t3 = 0.20, t4 = 0.05;
    double vs_max = 0.10;
};

/// Default (P, Q) operating point used when a playback event carries no
/// measured power channels.
struct OperatingPoint {
    double p = 0.8;
    double q = 0.2;
};

/// Full unit configuration. JSON layout:
///   {"machine": {...}, "exciter": {...}, "governor": {...},
///    "stabilizer": {"enabled": bool, ...}, "operating_point": {"p":, "q":}}
/// Unknown fields are rejected.
struct ModelConfig {
    MachineParams machine;
    ExciterParams exciter;
    GovernorParams governor;
    StabilizerParams stabilizer;
    OperatingPoint op;

    static ModelConfig from_json(const nlohmann::json& j);
    static ModelConfig from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// Flattened calibratable parameters (dotted names, default 0.5/2.0
    /// perturbation factors). Limits and saturation coefficients are
    /// structural and not included.
    ParameterSet parameter_set() const;

    /// Override one parameter by dotted name; throws ConfigError on an
    /// unknown name.
    void apply(const std::string& dotted_name, double value);
    void apply(const ParamAssignment& assignment);

    /// Value of a parameter by dotted name.
    double value_of(const std::string& dotted_name) const;
};

/// Instantaneous simulation state. `x` holds the model states; terminal
/// inputs (vmag, vang) are played back; the references are fixed by
/// init_equilibrium.
struct SimState {
    std::vector<double> x;
    double t = 0.0;
    double vmag = 1.0, vang = 0.0;
    double vref = 0.0, pm_set = 0.0;
};

/// Composed generator-unit ODE system: machine + exciter + governor +
/// optional stabilizer behind the subtransient reactance. Immutable after
/// construction and safe to share across threads; each simulation owns its
/// SimState.
class UnitModel {
public:
    // State vector layout.
    static constexpr int kDelta = 0;  // rotor angle, rad
    static constexpr int kOmega = 1;  // speed deviation, pu
    static constexpr int kEqp = 2;    // q-axis transient EMF
    static constexpr int kPsi1d = 3;  // d-axis damper flux
    static constexpr int kEdp = 4;    // d-axis transient EMF
    static constexpr int kPsi1q = 5;  // q-axis damper flux
    static constexpr int kExcLl = 6;  // exciter lead-lag state
    static constexpr int kEfd = 7;    // field voltage
    static constexpr int kPm = 8;     // mechanical power
    static constexpr int kPssW = 9;   // stabilizer washout state
    static constexpr int kPssL1 = 10;
    static constexpr int kPssL2 = 11;
    static constexpr std::size_t kMaxStates = 12;

    static constexpr double kOmegaBase = 2.0 * 3.14159265358979323846 * 60.0; // rad/s

    /// Validates parameters (reactance ordering, positive inertia and time
    /// constants) and wires the block diagram. Throws ConfigError.
    explicit UnitModel(const ModelConfig& cfg);

    std::size_t state_size() const { return nx_; }
    const ModelConfig& config() const { return cfg_; }

    /// Time derivative of the state vector; pure function of its arguments.
    /// Throws SimError on non-finite state or inputs.
    void derivatives(const SimState& s, std::vector<double>& dx) const;
    std::vector<double> derivatives(const SimState& s) const;

    /// One classical RK4 step with the terminal inputs held at the values
    /// stored in `s`. Throws SimError (with the failure time) if the state
    /// leaves the finite range.
    void step_rk4(SimState& s, double dt) const;

    /// RK4 step with time-varying terminal inputs; input_fn(t) returns
    /// (vmag, vang) and is evaluated at the stage times. On return the
    /// state's stored inputs are input_fn(t + dt).
    template <typename InputFn>
    void step_rk4(SimState& s, double dt, InputFn&& input_fn) const;

    /// Electrical (P, Q) at the terminal from the current state.
    std::pair<double, double> output(const SimState& s) const;

    /// Steady state matching the terminal condition (V, theta, P, Q):
    /// analytic phasor seed, then damped Newton on the derivative residual
    /// augmented with the output match, solving for the states and the two
    /// references. Throws SimError if the solve does not converge.
    SimState init_equilibrium(double vmag, double vang, double p, double q) const;

private:
    struct Dq {
        double vd, vq, psi_dpp, psi_qpp, id, iq, te;
    };
    Dq stator(double delta, double eqp, double psi1d, double edp, double psi1q,
              double vmag, double vang) const;
    void deriv_raw(const double* x, double vmag, double vang, double vref,
                   double pm_set, double* dx) const;
    void clamp_states(double* x) const;

    ModelConfig cfg_;
    std::size_t nx_ = 0;
    // derived machine constants
    double gd1_ = 0, gd2_ = 0, gq1_ = 0, gq2_ = 0;
    // control blocks
    Block exc_ll_{Block::gain(1.0)};
    Block exc_lag_{Block::gain(1.0)};
    Block gov_lag_{Block::gain(1.0)};
    Block pss_wash_{Block::gain(1.0)};
    Block pss_ll1_{Block::gain(1.0)};
    Block pss_ll2_{Block::gain(1.0)};
};

/// Builds a unit from configuration (spec surface; equivalent to the
/// constructor).
UnitModel build_unit(const ModelConfig& cfg);

template <typename InputFn>
void UnitModel::step_rk4(SimState& s, double dt, InputFn&& input_fn) const {
    if (!(dt > 0.0)) throw SimError("step_rk4: dt must be positive");
    const std::size_t n = nx_;
    std::array<double, kMaxStates> k1{}, k2{}, k3{}, k4{}, tmp{};
    const auto [v0, a0] = input_fn(s.t);
    deriv_raw(s.x.data(), v0, a0, s.vref, s.pm_set, k1.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = s.x[i] + 0.5 * dt * k1[i];
    const auto [vh, ah] = input_fn(s.t + 0.5 * dt);
    deriv_raw(tmp.data(), vh, ah, s.vref, s.pm_set, k2.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = s.x[i] + 0.5 * dt * k2[i];
    deriv_raw(tmp.data(), vh, ah, s.vref, s.pm_set, k3.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = s.x[i] + dt * k3[i];
    const auto [v1, a1] = input_fn(s.t + dt);
    deriv_raw(tmp.data(), v1, a1, s.vref, s.pm_set, k4.data());
    for (std::size_t i = 0; i < n; ++i)
        s.x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    clamp_states(s.x.data());
    s.t += dt;
    s.vmag = v1;
    s.vang = a1;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]))
            throw SimError("simulation diverged at t=" + fmt_double(s.t) + " s");
    }
}

} // namespace pscal
