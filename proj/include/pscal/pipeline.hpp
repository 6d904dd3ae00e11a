#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pscal/nn/train.hpp"
#include "pscal/playback.hpp"
#include "pscal/sensitivity.hpp"

namespace pscal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCalibrationNeeded = 1; // cmd_validate verdict, for scripting
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFailure = 3;

struct Thresholds {
    double mismatch = 0.02;
    double keep_ratio = 0.05;
    double delta_fraction = 0.02;
};

/// Run configuration shared by all subcommands. Stage artifacts are written
/// into out_dir so long stages are resumable; every stage checks its own
/// prerequisites.
struct PipelineConfig {
    std::filesystem::path model_path;
    std::filesystem::path event_path;
    std::filesystem::path out_dir = "out";
    std::vector<std::string> params; // restrict screening/calibration to these names
    std::size_t n = 2000;
    std::uint64_t seed = 1;
    double noise_std = 0.0;
    unsigned workers = 1;
    bool baseline = false; // also train/predict with the MLP
    Thresholds thresholds;
    nn::TrainConfig train;
    PlaybackOptions playback;

    /// Strict JSON load; relative paths resolve against the config file's
    /// directory. Referenced input files must exist.
    static PipelineConfig from_file(const std::filesystem::path& path);
};

// Stage commands; each returns a process exit code and writes its artifacts
// plus a wall-time entry in timings.json (the one deliberately
// non-deterministic artifact).
int cmd_validate(const PipelineConfig& cfg);
int cmd_sensitivity(const PipelineConfig& cfg);
int cmd_generate(const PipelineConfig& cfg);
int cmd_train(const PipelineConfig& cfg);
int cmd_predict(const PipelineConfig& cfg);
int cmd_report(const PipelineConfig& cfg);
int cmd_pipeline(const PipelineConfig& cfg);

} // namespace pscal
