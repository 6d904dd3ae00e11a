#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pscal/dataset.hpp"
#include "pscal/nn/layers.hpp"

namespace pscal::nn {

using LayerStack = std::vector<std::unique_ptr<Layer>>;

/// Forward/backward workspace for one layer stack.
struct StackWs {
    std::vector<LayerWs> items;
    std::vector<Signal> dsig; // dsig[i] shaped like layer i's input
};

/// Shared-trunk multi-output network. The trunk feeds every branch the same
/// features; each branch ends in a scalar head. A branchless network (MLP)
/// produces all outputs from the trunk directly.
class Network {
public:
    std::string family; // "cnn" | "mlp"
    int input_channels = 2;
    int input_length = 0;
    int n_outputs = 0;
    LayerStack trunk;
    std::vector<LayerStack> branches;

    /// Propagates shapes and validates head dimensions. Must be called after
    /// assembling the stacks and before any forward pass.
    void finalize();

    std::size_t parameter_count() const;
    void init_weights(std::uint64_t seed);

    /// Deterministic enumeration: trunk layers first, then each branch.
    std::vector<Layer*> all_layers();
    std::vector<const Layer*> all_layers() const;

    struct Ws {
        StackWs trunk;
        std::vector<StackWs> branches;
        Signal trunk_dout;
        Signal input_grad;
        std::vector<double> preds;
    };
    Ws make_ws() const;
    std::vector<LayerGrad> make_grads() const;

    /// input must be (input_channels, input_length); predictions land in
    /// ws.preds (n_outputs values).
    void forward(const Signal& input, Ws& ws, const FwdCtx& ctx) const;

    /// Reverse-mode gradients of whatever scalar produced dpreds; the trunk
    /// gradient is the sum of all branch contributions (fixed order).
    /// Requires the matching forward pass cached in ws.
    void backward(const Signal& input, Ws& ws, const std::vector<double>& dpreds,
                  std::vector<LayerGrad>& grads) const;

    std::vector<std::vector<double>> snapshot_weights() const;
    void restore_weights(const std::vector<std::vector<double>>& snap);

    nlohmann::json arch_json() const;

private:
    bool finalized_ = false;
};

struct CnnArch {
    int trunk_filters1 = 16, trunk_kernel1 = 7;
    int trunk_filters2 = 32, trunk_kernel2 = 5;
    int pool = 2;
    int branch_filters = 16, branch_kernel = 3, branch_pool = 2;
    int dense_units = 64;
    double dropout = 0.2;
};

/// Two shared conv+relu+pool stages, then one branch per output:
/// conv+relu+pool, flatten, dense+relu, dropout, dense(1).
Network build_cnn(int input_length, int n_params, const CnnArch& arch = {});

struct MlpArch {
    int hidden_layers = 3;
    double dropout = 0.2;
};

/// Flatten followed by `hidden_layers` dense+relu stages, dropout, and a
/// dense(n_params) head. The hidden width is solved so the trainable
/// parameter count matches `target_params` (default: the CNN built with the
/// same dimensions) within the given tolerance.
Network build_mlp(int input_length, int n_params, std::size_t target_params = 0,
                  double tolerance = 0.2, const MlpArch& arch = {});

/// Versioned JSON checkpoint: architecture descriptor + weights + the dataset
/// normalization metadata needed at inference time.
void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const DatasetMeta& meta);

struct Checkpoint {
    Network net;
    DatasetMeta meta;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace pscal::nn
