#include "pscal/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "pscal/common.hpp"

namespace pscal::nn {

std::size_t Layer::parameter_count() const {
    std::size_t n = 0;
    if (auto* w = weights()) n += w->size();
    if (auto* b = biases()) n += b->size();
    return n;
}

namespace {

class Conv1d final : public Layer {
public:
    Conv1d(int filters, int kernel) : filters_(filters), kernel_(kernel) {
        if (filters < 1 || kernel < 1)
            throw ConfigError("conv1d: filters and kernel must be >= 1");
    }

    LayerKind kind() const override { return LayerKind::Conv1d; }
    std::string name() const override { return "conv1d"; }

    void set_input_shape(int channels, int length) override {
        if (length < kernel_)
            throw ConfigError("conv1d: input too short (length " + std::to_string(length) +
                              " < kernel " + std::to_string(kernel_) + ")");
        in_ch_ = channels;
        in_len_ = length;
        out_ch_ = filters_;
        out_len_ = length - kernel_ + 1;
        w_.assign(static_cast<std::size_t>(filters_) * channels * kernel_, 0.0);
        b_.assign(filters_, 0.0);
    }

    std::vector<double>* weights() override { return &w_; }
    std::vector<double>* biases() override { return &b_; }

    void init_weights(Rng& rng) override {
        const double limit = std::sqrt(6.0 / (in_ch_ * kernel_));
        for (auto& x : w_) x = rng.uniform(-limit, limit);
        std::fill(b_.begin(), b_.end(), 0.0);
    }

    // Valid cross-correlation, stride 1, summed over input channels.
    void forward(const Signal& in, LayerWs& ws, const FwdCtx&) const override {
        ws.out.resize(out_ch_, out_len_);
        for (int f = 0; f < filters_; ++f) {
            double* orow = ws.out.row(f);
            std::fill(orow, orow + out_len_, b_[f]);
            for (int c = 0; c < in_ch_; ++c) {
                const double* irow = in.row(c);
                const double* wrow = w_.data() + (static_cast<std::size_t>(f) * in_ch_ + c) * kernel_;
                for (int j = 0; j < kernel_; ++j) {
                    const double wj = wrow[j];
                    const double* ishift = irow + j;
                    for (int p = 0; p < out_len_; ++p) orow[p] += wj * ishift[p];
                }
            }
        }
    }

    void backward(const Signal& in, const LayerWs&, const Signal& dout, Signal& din,
                  LayerGrad* grad) const override {
        din.zero();
        for (int f = 0; f < filters_; ++f) {
            const double* drow = dout.row(f);
            double* gw_f = grad ? grad->w.data() + static_cast<std::size_t>(f) * in_ch_ * kernel_
                                : nullptr;
            if (grad) {
                double acc = 0.0;
                for (int p = 0; p < out_len_; ++p) acc += drow[p];
                grad->b[f] += acc;
            }
            for (int c = 0; c < in_ch_; ++c) {
                const double* irow = in.row(c);
                double* dirow = din.row(c);
                const double* wrow = w_.data() + (static_cast<std::size_t>(f) * in_ch_ + c) * kernel_;
                for (int j = 0; j < kernel_; ++j) {
                    const double wj = wrow[j];
                    double* dish = dirow + j;
                    const double* ishift = irow + j;
                    double acc = 0.0;
                    for (int p = 0; p < out_len_; ++p) {
                        dish[p] += wj * drow[p];
                        acc += ishift[p] * drow[p];
                    }
                    if (grad) gw_f[static_cast<std::size_t>(c) * kernel_ + j] += acc;
                }
            }
        }
    }

    nlohmann::json spec_json() const override {
        return {{"kind", "conv1d"}, {"filters", filters_}, {"kernel", kernel_}};
    }

private:
    int filters_, kernel_;
    std::vector<double> w_, b_;
};

class Relu final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::Relu; }
    std::string name() const override { return "relu"; }

    void set_input_shape(int channels, int length) override {
        in_ch_ = out_ch_ = channels;
        in_len_ = out_len_ = length;
    }

    void forward(const Signal& in, LayerWs& ws, const FwdCtx&) const override {
        ws.out.resize(out_ch_, out_len_);
        for (int i = 0; i < in.size(); ++i) ws.out.v[i] = in.v[i] > 0.0 ? in.v[i] : 0.0;
    }

    // Subgradient at 0 is taken as 0 (the gate uses the output sign).
    void backward(const Signal&, const LayerWs& ws, const Signal& dout, Signal& din,
                  LayerGrad*) const override {
        for (int i = 0; i < din.size(); ++i) din.v[i] = ws.out.v[i] > 0.0 ? dout.v[i] : 0.0;
    }

    nlohmann::json spec_json() const override { return {{"kind", "relu"}}; }
};

class MaxPool1d final : public Layer {
public:
    explicit MaxPool1d(int window) : window_(window) {
        if (window < 1) throw ConfigError("maxpool1d: window must be >= 1");
    }

    LayerKind kind() const override { return LayerKind::MaxPool1d; }
    std::string name() const override { return "maxpool1d"; }

    void set_input_shape(int channels, int length) override {
        if (length < window_)
            throw ConfigError("maxpool1d: input too short (length " + std::to_string(length) +
                              " < window " + std::to_string(window_) + ")");
        in_ch_ = out_ch_ = channels;
        in_len_ = length;
        out_len_ = length / window_; // trailing remainder dropped
    }

    void forward(const Signal& in, LayerWs& ws, const FwdCtx&) const override {
        ws.out.resize(out_ch_, out_len_);
        ws.argmax.assign(static_cast<std::size_t>(out_ch_) * out_len_, 0);
        for (int c = 0; c < in_ch_; ++c) {
            const double* irow = in.row(c);
            double* orow = ws.out.row(c);
            int* arow = ws.argmax.data() + static_cast<std::size_t>(c) * out_len_;
            for (int p = 0; p < out_len_; ++p) {
                int best = p * window_;
                double bv = irow[best];
                for (int j = 1; j < window_; ++j) {
                    const int idx = p * window_ + j;
                    if (irow[idx] > bv) { // first maximum wins ties
                        bv = irow[idx];
                        best = idx;
                    }
                }
                orow[p] = bv;
                arow[p] = best;
            }
        }
    }

    void backward(const Signal&, const LayerWs& ws, const Signal& dout, Signal& din,
                  LayerGrad*) const override {
        din.zero();
        for (int c = 0; c < out_ch_; ++c) {
            const double* drow = dout.row(c);
            double* dirow = din.row(c);
            const int* arow = ws.argmax.data() + static_cast<std::size_t>(c) * out_len_;
            for (int p = 0; p < out_len_; ++p) dirow[arow[p]] += drow[p];
        }
    }

    nlohmann::json spec_json() const override {
        return {{"kind", "maxpool1d"}, {"window", window_}};
    }

private:
    int window_;
};

class Dense final : public Layer {
public:
    explicit Dense(int units) : units_(units) {
        if (units < 1) throw ConfigError("dense: units must be >= 1");
    }

    LayerKind kind() const override { return LayerKind::Dense; }
    std::string name() const override { return "dense"; }

    void set_input_shape(int channels, int length) override {
        if (channels != 1)
            throw ConfigError("dense: expects flattened input (got " +
                              std::to_string(channels) + " channels)");
        in_ch_ = 1;
        in_len_ = length;
        out_ch_ = 1;
        out_len_ = units_;
        w_.assign(static_cast<std::size_t>(units_) * length, 0.0);
        b_.assign(units_, 0.0);
    }

    std::vector<double>* weights() override { return &w_; }
    std::vector<double>* biases() override { return &b_; }

    void init_weights(Rng& rng) override {
        const double limit = std::sqrt(6.0 / in_len_);
        for (auto& x : w_) x = rng.uniform(-limit, limit);
        std::fill(b_.begin(), b_.end(), 0.0);
    }

    void forward(const Signal& in, LayerWs& ws, const FwdCtx&) const override {
        ws.out.resize(1, units_);
        for (int u = 0; u < units_; ++u) {
            const double* wrow = w_.data() + static_cast<std::size_t>(u) * in_len_;
            double acc = b_[u];
            for (int j = 0; j < in_len_; ++j) acc += wrow[j] * in.v[j];
            ws.out.v[u] = acc;
        }
    }

    void backward(const Signal& in, const LayerWs&, const Signal& dout, Signal& din,
                  LayerGrad* grad) const override {
        din.zero();
        for (int u = 0; u < units_; ++u) {
            const double d = dout.v[u];
            const double* wrow = w_.data() + static_cast<std::size_t>(u) * in_len_;
            if (grad) {
                grad->b[u] += d;
                double* gw = grad->w.data() + static_cast<std::size_t>(u) * in_len_;
                for (int j = 0; j < in_len_; ++j) {
                    gw[j] += d * in.v[j];
                    din.v[j] += d * wrow[j];
                }
            } else {
                for (int j = 0; j < in_len_; ++j) din.v[j] += d * wrow[j];
            }
        }
    }

    nlohmann::json spec_json() const override {
        return {{"kind", "dense"}, {"units", units_}};
    }

private:
    int units_;
    std::vector<double> w_, b_;
};

class Dropout final : public Layer {
public:
    explicit Dropout(double rate) : rate_(rate) {
        if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must lie in [0, 1)");
    }

    LayerKind kind() const override { return LayerKind::Dropout; }
    std::string name() const override { return "dropout"; }

    void set_input_shape(int channels, int length) override {
        in_ch_ = out_ch_ = channels;
        in_len_ = out_len_ = length;
    }

    /// Inverted dropout: in train mode each unit is zeroed with probability
    /// `rate` and survivors are scaled by 1/(1-rate); in eval mode identity.
    void forward(const Signal& in, LayerWs& ws, const FwdCtx& ctx) const override {
        ws.out.resize(out_ch_, out_len_);
        const auto n = static_cast<std::size_t>(in.size());
        if (!ctx.train || rate_ == 0.0) {
            ws.out.v = in.v;
            ws.mask.assign(n, 1);
            return;
        }
        if (!ctx.reuse_masks) {
            if (!ctx.rng) throw SimError("dropout: train-mode forward needs an rng");
            ws.mask.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                ws.mask[i] = ctx.rng->uniform01() >= rate_ ? 1 : 0;
        } else if (ws.mask.size() != n) {
            throw SimError("dropout: no cached mask to reuse");
        }
        const double scale = 1.0 / (1.0 - rate_);
        for (std::size_t i = 0; i < n; ++i)
            ws.out.v[i] = ws.mask[i] ? in.v[i] * scale : 0.0;
    }

    void backward(const Signal&, const LayerWs& ws, const Signal& dout, Signal& din,
                  LayerGrad*) const override {
        if (ws.mask.empty()) { // eval-mode forward
            din.v = dout.v;
            return;
        }
        const double scale = rate_ == 0.0 ? 1.0 : 1.0 / (1.0 - rate_);
        for (int i = 0; i < din.size(); ++i)
            din.v[i] = ws.mask[i] ? dout.v[i] * scale : 0.0;
    }

    double rate() const { return rate_; }

    nlohmann::json spec_json() const override {
        return {{"kind", "dropout"}, {"rate", rate_}};
    }

private:
    double rate_;
};

class Flatten final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::Flatten; }
    std::string name() const override { return "flatten"; }

    void set_input_shape(int channels, int length) override {
        in_ch_ = channels;
        in_len_ = length;
        out_ch_ = 1;
        out_len_ = channels * length;
    }

    void forward(const Signal& in, LayerWs& ws, const FwdCtx&) const override {
        ws.out.channels = 1;
        ws.out.length = out_len_;
        ws.out.v = in.v;
    }

    void backward(const Signal&, const LayerWs&, const Signal& dout, Signal& din,
                  LayerGrad*) const override {
        din.v = dout.v;
    }

    nlohmann::json spec_json() const override { return {{"kind", "flatten"}}; }
};

} // namespace

std::unique_ptr<Layer> make_conv1d(int filters, int kernel) {
    return std::make_unique<Conv1d>(filters, kernel);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<Relu>(); }
std::unique_ptr<Layer> make_maxpool1d(int window) { return std::make_unique<MaxPool1d>(window); }
std::unique_ptr<Layer> make_dense(int units) { return std::make_unique<Dense>(units); }
std::unique_ptr<Layer> make_dropout(double rate) { return std::make_unique<Dropout>(rate); }
std::unique_ptr<Layer> make_flatten() { return std::make_unique<Flatten>(); }

std::unique_ptr<Layer> layer_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv1d") return make_conv1d(j.at("filters").get<int>(), j.at("kernel").get<int>());
    if (kind == "relu") return make_relu();
    if (kind == "maxpool1d") return make_maxpool1d(j.at("window").get<int>());
    if (kind == "dense") return make_dense(j.at("units").get<int>());
    if (kind == "dropout") return make_dropout(j.at("rate").get<double>());
    if (kind == "flatten") return make_flatten();
    throw ConfigError("layer_from_json: unknown layer kind '" + kind + "'");
}

} // namespace pscal::nn
