#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pscal/nn/signal.hpp"
#include "pscal/rng.hpp"

namespace pscal::nn {

enum class LayerKind { Conv1d, Relu, MaxPool1d, Dense, Dropout, Flatten };

/// Per-sample forward cache: the layer output plus whatever backward needs
/// (pool argmax positions, dropout mask).
struct LayerWs {
    Signal out;
    std::vector<int> argmax;
    std::vector<std::uint8_t> mask;
};

/// Gradient accumulator matching one layer's weights/biases.
struct LayerGrad {
    std::vector<double> w, b;
    void zero() {
        std::fill(w.begin(), w.end(), 0.0);
        std::fill(b.begin(), b.end(), 0.0);
    }
};

struct FwdCtx {
    bool train = false;
    bool reuse_masks = false; // keep the previous dropout masks (gradient checks)
    Rng* rng = nullptr;       // consumed only by dropout in train mode
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual std::string name() const = 0;

    /// Computes the output shape; throws ConfigError when the input is too
    /// short for the layer. Must be called before use.
    virtual void set_input_shape(int channels, int length) = 0;

    int in_channels() const { return in_ch_; }
    int in_length() const { return in_len_; }
    int out_channels() const { return out_ch_; }
    int out_length() const { return out_len_; }

    virtual std::vector<double>* weights() { return nullptr; }
    virtual std::vector<double>* biases() { return nullptr; }
    const std::vector<double>* weights() const { return const_cast<Layer*>(this)->weights(); }
    const std::vector<double>* biases() const { return const_cast<Layer*>(this)->biases(); }
    std::size_t parameter_count() const;

    /// Fan-in scaled uniform initialization (no-op for parameterless layers).
    virtual void init_weights(Rng&) {}

    virtual void forward(const Signal& in, LayerWs& ws, const FwdCtx& ctx) const = 0;

    /// din must be pre-sized to the input shape (it is overwritten). grad may
    /// be null to skip parameter gradients.
    virtual void backward(const Signal& in, const LayerWs& ws, const Signal& dout,
                          Signal& din, LayerGrad* grad) const = 0;

    /// Architecture descriptor (no weights).
    virtual nlohmann::json spec_json() const = 0;

protected:
    int in_ch_ = 0, in_len_ = 0, out_ch_ = 0, out_len_ = 0;
};

std::unique_ptr<Layer> make_conv1d(int filters, int kernel);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_maxpool1d(int window);
std::unique_ptr<Layer> make_dense(int units);
std::unique_ptr<Layer> make_dropout(double rate);
std::unique_ptr<Layer> make_flatten();

/// Rebuilds a layer from its spec_json() descriptor.
std::unique_ptr<Layer> layer_from_json(const nlohmann::json& j);

} // namespace pscal::nn
