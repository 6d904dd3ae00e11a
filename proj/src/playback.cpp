#include "pscal/playback.hpp"

#include <algorithm>
#include <cmath>

#include "pscal/common.hpp"

namespace pscal {

Trajectory playback(const ModelConfig& cfg, const ParamAssignment& overrides,
                    const Trajectory& drive, const PlaybackOptions& opt) {
    if (drive.size() < 2) throw ConfigError("playback: trajectory needs at least 2 samples");
    if (!(opt.dt_max > 0.0)) throw ConfigError("playback: dt_max must be positive");

    ModelConfig c = cfg;
    c.apply(overrides);
    const UnitModel model(c);

    const bool measured = drive.p.has_value() && drive.q.has_value();
    const double p0 = measured ? (*drive.p)[0] : c.op.p;
    const double q0 = measured ? (*drive.q)[0] : c.op.q;

    SimState s = model.init_equilibrium(drive.vmag[0], drive.vang[0], p0, q0);
    s.t = drive.t0;

    const std::size_t m = drive.size();
    const double dt_s = drive.dt_sample;
    const auto n_sub = static_cast<std::size_t>(std::ceil(dt_s / opt.dt_max - 1e-12));
    const std::size_t steps = std::max<std::size_t>(1, n_sub);
    const double dt = dt_s / static_cast<double>(steps);

    std::vector<double> sim_p(m), sim_q(m);
    {
        auto [pp, qq] = model.output(s);
        sim_p[0] = pp;
        sim_q[0] = qq;
    }
    for (std::size_t k = 1; k < m; ++k) {
        const double ta = drive.time_at(k - 1);
        const double va = drive.vmag[k - 1], vb = drive.vmag[k];
        const double aa = drive.vang[k - 1], ab = drive.vang[k];
        auto interp = [&](double t) {
            double f = (t - ta) / dt_s;
            f = std::clamp(f, 0.0, 1.0);
            return std::pair{va + f * (vb - va), aa + f * (ab - aa)};
        };
        for (std::size_t j = 0; j < steps; ++j) model.step_rk4(s, dt, interp);
        // land exactly on the sample values
        s.t = drive.time_at(k);
        s.vmag = vb;
        s.vang = ab;
        auto [pp, qq] = model.output(s);
        sim_p[k] = pp;
        sim_q[k] = qq;
    }

    Trajectory out;
    out.t0 = drive.t0;
    out.dt_sample = drive.dt_sample;
    out.vmag = drive.vmag;
    out.vang = drive.vang;
    out.p = std::move(sim_p);
    out.q = std::move(sim_q);
    return out;
}

namespace {

double channel_nrmse(const std::vector<double>& sim, const std::vector<double>& meas) {
    double sum_sq = 0.0;
    double lo = meas[0], hi = meas[0];
    for (std::size_t k = 0; k < meas.size(); ++k) {
        const double d = sim[k] - meas[k];
        sum_sq += d * d;
        lo = std::min(lo, meas[k]);
        hi = std::max(hi, meas[k]);
    }
    const double rms = std::sqrt(sum_sq / static_cast<double>(meas.size()));
    return rms / (hi - lo + 1e-9);
}

} // namespace

MismatchScore mismatch(const Trajectory& sim, const Trajectory& meas) {
    if (sim.size() != meas.size())
        throw ConfigError("mismatch: trajectory length mismatch");
    if (std::fabs(sim.t0 - meas.t0) > 1e-9 || std::fabs(sim.dt_sample - meas.dt_sample) > 1e-9)
        throw ConfigError("mismatch: trajectories are not time-aligned");
    if (!sim.p || !sim.q || !meas.p || !meas.q)
        throw ConfigError("mismatch: both trajectories must carry p and q channels");

    MismatchScore s;
    s.nrmse_p = channel_nrmse(*sim.p, *meas.p);
    s.nrmse_q = channel_nrmse(*sim.q, *meas.q);
    s.combined = 0.5 * (s.nrmse_p + s.nrmse_q);
    return s;
}

bool needs_calibration(const MismatchScore& score, double threshold) {
    if (!(threshold > 0.0)) throw ConfigError("needs_calibration: threshold must be positive");
    return score.combined > threshold;
}

} // namespace pscal
