#pragma once

#include "pscal/params.hpp"
#include "pscal/trajectory.hpp"
#include "pscal/unit_model.hpp"

namespace pscal {

struct PlaybackOptions {
    /// Internal integration substep ceiling; each sample interval is divided
    /// into equal substeps no longer than this.
    double dt_max = 1.0 / 240.0;
};

/// Drives the unit model with the recorded terminal voltage (linearly
/// interpolated between samples) and returns a trajectory carrying the
/// simulated P and Q at the input timestamps. The simulation starts from the
/// equilibrium matching the first sample, using the measured power there when
/// the trajectory provides it and the model's configured operating point
/// otherwise. Throws SimError on initialization failure or divergence.
Trajectory playback(const ModelConfig& cfg, const ParamAssignment& overrides,
                    const Trajectory& drive, const PlaybackOptions& opt = {});

/// Range-normalized RMS mismatch between simulated and measured power.
struct MismatchScore {
    double nrmse_p = 0.0;
    double nrmse_q = 0.0;
    double combined = 0.0; // mean of the two
};

/// Per channel: RMS(sim - meas) / (max(meas) - min(meas) + 1e-9).
/// Requires both trajectories aligned (equal length, t0 and dt within 1e-9)
/// with P and Q present.
MismatchScore mismatch(const Trajectory& sim, const Trajectory& meas);

/// True iff the combined score strictly exceeds the threshold.
bool needs_calibration(const MismatchScore& score, double threshold = 0.02);

} // namespace pscal
