#pragma once

#include <limits>
#include <vector>

namespace pscal {

enum class BlockKind { Gain, Lag, LeadLag, Washout, LimitedIntegrator, Saturation };

/// Scalar transfer-function element with at most one internal state.
///
///   Gain               y = K u
///   Lag                K / (1 + s T); the state is the output. Optional
///                      output limits with anti-windup. T below `epsilon`
///                      degrades the block to an algebraic gain.
///   LeadLag            (1 + s T1) / (1 + s T2)
///   Washout            s T / (1 + s T)
///   LimitedIntegrator  K / s clamped to [lo, hi] with anti-windup
///   Saturation         y = b * max(0, u - a)^2   (quadratic, stateless)
class Block {
public:
    static constexpr double kDefaultEpsilon = 1e-4;

    static Block gain(double k);
    static Block lag(double k, double t,
                     double lo = -std::numeric_limits<double>::infinity(),
                     double hi = std::numeric_limits<double>::infinity(),
                     double epsilon = kDefaultEpsilon);
    static Block lead_lag(double t1, double t2, double epsilon = kDefaultEpsilon);
    static Block washout(double t, double epsilon = kDefaultEpsilon);
    static Block limited_integrator(double k, double lo, double hi);
    static Block saturation(double a, double b);

    BlockKind kind() const { return kind_; }
    bool has_state() const { return has_state_; }

    /// Block output as a function of (state, input).
    double output(double x, double u) const;

    /// State derivative; pure function of (state, input). Zero for
    /// stateless blocks. Limits are enforced with anti-windup: at a bound,
    /// a derivative pushing further out is zeroed.
    double dxdt(double x, double u) const;

    /// Equilibrium state for a constant input (integrators return 0; the
    /// caller may overwrite to select a particular output level).
    double init_state(double u) const;

    /// Clamp a state to the block's limits (post-integration).
    double clamp_state(double x) const;

private:
    Block() = default;

    BlockKind kind_ = BlockKind::Gain;
    bool has_state_ = false;
    double k_ = 1.0;
    double t1_ = 0.0; // lead time constant / saturation knee
    double t2_ = 0.0; // lag time constant / saturation coefficient
    double lo_ = -std::numeric_limits<double>::infinity();
    double hi_ = std::numeric_limits<double>::infinity();
};

/// Classical 4th-order Runge-Kutta step for dx/dt = f(x, t).
/// f(x, t, dx) writes the derivative into dx (same length as x).
template <typename F>
void rk4_step(F&& f, std::vector<double>& x, double t, double dt) {
    const std::size_t n = x.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    f(x, t, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    f(tmp, t + 0.5 * dt, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    f(tmp, t + 0.5 * dt, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    f(tmp, t + dt, k4);
    for (std::size_t i = 0; i < n; ++i)
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

} // namespace pscal
