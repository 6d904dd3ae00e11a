#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pscal/playback.hpp"

namespace pscal {

/// Disjoint row indices covering the whole dataset.
struct Split {
    std::vector<std::size_t> train, val, test;
};

struct DatasetMeta {
    std::vector<std::string> names;          // calibrated parameter names, in order
    std::vector<double> bases;
    std::vector<double> lower_factors;
    std::vector<double> upper_factors;
    std::uint64_t seed = 0;
    double noise_std = 0.0;
    std::string event_id;
    std::size_t waveform_len = 0;            // m, samples per channel
    // input standardization (set by normalize_inputs; applied per channel)
    bool normalized = false;
    std::array<double, 2> input_mean{0.0, 0.0};
    std::array<double, 2> input_std{1.0, 1.0};
    std::vector<int> constant_channels;      // flagged zero-variance channels
};

/// Labeled training data: each row pairs the deviation waveforms
/// (P - P[0], Q - Q[0]) with the normalized target parameter vector
///   target = (value / base - lower_factor) / (upper_factor - lower_factor).
struct Dataset {
    DatasetMeta meta;
    std::size_t n = 0;
    std::vector<double> inputs;   // n rows x (2 * m): [dP(0..m) | dQ(0..m)]
    std::vector<double> targets;  // n rows x k
    std::optional<Split> split;

    std::size_t input_width() const { return 2 * meta.waveform_len; }
    std::size_t k() const { return meta.names.size(); }
    const double* input_row(std::size_t i) const { return inputs.data() + i * input_width(); }
    const double* target_row(std::size_t i) const { return targets.data() + i * k(); }
};

double normalize_target(double value, double base, double lower_factor, double upper_factor);
double denormalize_target(double t, double base, double lower_factor, double upper_factor);

/// Independent uniform draw per selected parameter over
/// [lower_factor * base, upper_factor * base]; a pure function of
/// (seed, index, attempt). Unselected parameters keep their base values.
ParamAssignment sample_parameters(const ParameterSet& base, const std::vector<std::string>& names,
                                  std::uint64_t seed, std::uint64_t index,
                                  std::uint64_t attempt = 0);

/// Generates n labeled samples by playback of the event under randomly
/// perturbed parameters. Failed simulations are re-drawn (at most
/// kMaxAttempts per row) and the whole call fails if a row exhausts its
/// retries. Sample generation is parallel over rows and bit-identical for
/// any worker count.
Dataset generate_dataset(const ModelConfig& cfg, const Trajectory& event,
                         const std::vector<std::string>& names, std::size_t n,
                         std::uint64_t seed, double noise_std = 0.0, unsigned workers = 1,
                         const PlaybackOptions& opt = {}, std::string event_id = {});

constexpr int kMaxAttempts = 8;

/// Seeded shuffle followed by a contiguous cut; ratios must be positive and
/// sum to 1. Defaults split 90% train+validation as 81/9, leaving 10% test.
Split split_dataset(const Dataset& ds, std::array<double, 3> ratios = {0.81, 0.09, 0.10},
                    std::uint64_t seed = 0);

/// Standardizes each input channel with statistics computed on the train
/// split only; the statistics are stored in meta for inference-time reuse.
/// A zero-variance channel is flagged and left divided by 1.
void normalize_inputs(Dataset& ds);

/// Applies / inverts the stored standardization to a raw waveform laid out
/// like an input row.
void apply_input_stats(const DatasetMeta& meta, std::vector<double>& waveform);
void invert_input_stats(const DatasetMeta& meta, std::vector<double>& waveform);

nlohmann::json to_json(const DatasetMeta& meta);
DatasetMeta dataset_meta_from_json(const nlohmann::json& j);

/// Directory layout: meta.json + inputs.csv + targets.csv (row-major; an
/// inputs row is dP[0..m) followed by dQ[0..m)).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

} // namespace pscal
