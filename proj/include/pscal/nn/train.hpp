#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pscal/dataset.hpp"
#include "pscal/nn/network.hpp"

namespace pscal::nn {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int patience = 20; // early stop after this many epochs without improvement; <= 0 disables
    std::uint64_t rng_seed = 0;
    unsigned workers = 1;
};

/// Loss and per-epoch history. Losses are normalized by the validation loss
/// of the untrained network (loss_norm). Wall time is kept in memory only and
/// never serialized, so reports stay byte-identical across re-runs.
struct TrainingReport {
    std::vector<double> train_loss; // one entry per completed epoch
    std::vector<double> val_loss;
    double loss_norm = 1.0;
    int best_epoch = 0;        // 1-based; 0 = never improved
    double best_val_loss = 0;  // normalized
    std::vector<std::string> names;
    std::vector<double> test_mean_pct_err; // per parameter, % of base value
    std::vector<double> test_max_pct_err;
    double wall_seconds = 0.0; // not serialized

    nlohmann::json to_json() const;
    static TrainingReport from_json(const nlohmann::json& j);
};

/// Root-mean-square loss over all entries of a (batch x outputs) prediction
/// block, plus its gradient with respect to the predictions.
std::pair<double, std::vector<double>> rms_loss(const std::vector<double>& pred,
                                                const std::vector<double>& target);

/// Seeded minibatch Adam with inverted dropout active for training batches
/// and disabled for validation. Keeps the best-validation weights (restored
/// on return) and stops early after `patience` epochs without improvement.
/// Within-batch sample evaluation is parallel with a fixed pairwise gradient
/// reduction, so results are identical for any worker count.
TrainingReport train(Network& net, const Dataset& ds, const Split& split,
                     const TrainConfig& cfg);

struct Prediction {
    std::vector<double> values;      // physical units, clamped to bounds
    std::vector<bool> clamped;       // true where the raw output left [0, 1]
    std::vector<double> raw_normalized;
};

/// Applies the stored input statistics to a raw deviation waveform
/// (dP | dQ, length 2m), runs the network in eval mode, and denormalizes the
/// outputs to physical units, clamping into the sampled range.
Prediction predict(const Network& net, const std::vector<double>& waveform,
                   const DatasetMeta& meta);

} // namespace pscal::nn
