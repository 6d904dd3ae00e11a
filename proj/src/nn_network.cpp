#include "pscal/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "pscal/common.hpp"

namespace pscal::nn {

namespace {

void propagate(LayerStack& stack, int& ch, int& len) {
    for (auto& layer : stack) {
        layer->set_input_shape(ch, len);
        ch = layer->out_channels();
        len = layer->out_length();
    }
}

const Signal& forward_stack(const LayerStack& stack, const Signal& in, StackWs& ws,
                            const FwdCtx& ctx) {
    const Signal* cur = &in;
    for (std::size_t i = 0; i < stack.size(); ++i) {
        stack[i]->forward(*cur, ws.items[i], ctx);
        cur = &ws.items[i].out;
    }
    return *cur;
}

/// Walks the stack backwards; dinput receives dL/d(stack input). grads may be
/// empty (skip parameter gradients).
void backward_stack(const LayerStack& stack, const Signal& in, StackWs& ws,
                    const Signal& dout, Signal& dinput, LayerGrad* grads) {
    const Signal* cur_dout = &dout;
    for (std::size_t i = stack.size(); i-- > 0;) {
        const Signal& layer_in = i == 0 ? in : ws.items[i - 1].out;
        Signal& din = i == 0 ? dinput : ws.dsig[i];
        stack[i]->backward(layer_in, ws.items[i], *cur_dout, din, grads ? &grads[i] : nullptr);
        cur_dout = &din;
    }
}

StackWs make_stack_ws(const LayerStack& stack, int in_ch, int in_len) {
    StackWs ws;
    ws.items.resize(stack.size());
    ws.dsig.resize(stack.size());
    int ch = in_ch, len = in_len;
    for (std::size_t i = 0; i < stack.size(); ++i) {
        ws.dsig[i].resize(ch, len); // input shape of layer i
        ch = stack[i]->out_channels();
        len = stack[i]->out_length();
    }
    return ws;
}

} // namespace

void Network::finalize() {
    if (input_length < 1 || input_channels < 1 || n_outputs < 1)
        throw ConfigError("network: invalid input/output dimensions");
    int ch = input_channels, len = input_length;
    propagate(trunk, ch, len);
    const int feat_ch = ch, feat_len = len;
    if (branches.empty()) {
        if (ch != 1 || len != n_outputs)
            throw ConfigError("network: trunk head must emit exactly n_outputs values");
    } else {
        for (auto& branch : branches) {
            int bch = feat_ch, blen = feat_len;
            propagate(branch, bch, blen);
            if (bch != 1 || blen != 1)
                throw ConfigError("network: every branch must end in a scalar head");
        }
    }
    finalized_ = true;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto* layer : all_layers()) n += layer->parameter_count();
    return n;
}

void Network::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    for (auto* layer : all_layers()) layer->init_weights(rng);
}

std::vector<Layer*> Network::all_layers() {
    std::vector<Layer*> out;
    for (auto& l : trunk) out.push_back(l.get());
    for (auto& branch : branches)
        for (auto& l : branch) out.push_back(l.get());
    return out;
}

std::vector<const Layer*> Network::all_layers() const {
    std::vector<const Layer*> out;
    for (const auto& l : trunk) out.push_back(l.get());
    for (const auto& branch : branches)
        for (const auto& l : branch) out.push_back(l.get());
    return out;
}

Network::Ws Network::make_ws() const {
    if (!finalized_) throw SimError("network: finalize() must run before make_ws()");
    Ws ws;
    ws.trunk = make_stack_ws(trunk, input_channels, input_length);
    int feat_ch = input_channels, feat_len = input_length;
    if (!trunk.empty()) {
        feat_ch = trunk.back()->out_channels();
        feat_len = trunk.back()->out_length();
    }
    for (const auto& branch : branches)
        ws.branches.push_back(make_stack_ws(branch, feat_ch, feat_len));
    ws.trunk_dout.resize(feat_ch, feat_len);
    ws.input_grad.resize(input_channels, input_length);
    ws.preds.assign(n_outputs, 0.0);
    return ws;
}

std::vector<LayerGrad> Network::make_grads() const {
    std::vector<LayerGrad> grads;
    for (const auto* layer : all_layers()) {
        LayerGrad g;
        if (auto* w = layer->weights()) g.w.assign(w->size(), 0.0);
        if (auto* b = layer->biases()) g.b.assign(b->size(), 0.0);
        grads.push_back(std::move(g));
    }
    return grads;
}

void Network::forward(const Signal& input, Ws& ws, const FwdCtx& ctx) const {
    if (input.channels != input_channels || input.length != input_length)
        throw SimError("network: input shape mismatch");
    const Signal& feat = trunk.empty() ? input : forward_stack(trunk, input, ws.trunk, ctx);
    if (branches.empty()) {
        std::copy(feat.v.begin(), feat.v.end(), ws.preds.begin());
        return;
    }
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const Signal& out = forward_stack(branches[b], feat, ws.branches[b], ctx);
        ws.preds[b] = out.v[0];
    }
}

void Network::backward(const Signal& input, Ws& ws, const std::vector<double>& dpreds,
                       std::vector<LayerGrad>& grads) const {
    if (dpreds.size() != static_cast<std::size_t>(n_outputs))
        throw SimError("network: dpreds size mismatch");
    const Signal& feat = trunk.empty() ? input : ws.trunk.items.back().out;
    LayerGrad* gtrunk = grads.empty() ? nullptr : grads.data();
    if (branches.empty()) {
        Signal dout(1, n_outputs);
        std::copy(dpreds.begin(), dpreds.end(), dout.v.begin());
        backward_stack(trunk, input, ws.trunk, dout, ws.input_grad, gtrunk);
        return;
    }
    ws.trunk_dout.zero();
    std::size_t offset = trunk.size();
    Signal dscalar(1, 1);
    Signal dfeat(feat.channels, feat.length);
    for (std::size_t b = 0; b < branches.size(); ++b) {
        dscalar.v[0] = dpreds[b];
        backward_stack(branches[b], feat, ws.branches[b], dscalar, dfeat,
                       grads.empty() ? nullptr : grads.data() + offset);
        for (int i = 0; i < dfeat.size(); ++i) ws.trunk_dout.v[i] += dfeat.v[i];
        offset += branches[b].size();
    }
    if (!trunk.empty())
        backward_stack(trunk, input, ws.trunk, ws.trunk_dout, ws.input_grad, gtrunk);
}

std::vector<std::vector<double>> Network::snapshot_weights() const {
    std::vector<std::vector<double>> snap;
    for (const auto* layer : all_layers()) {
        if (auto* w = layer->weights()) snap.push_back(*w);
        if (auto* b = layer->biases()) snap.push_back(*b);
    }
    return snap;
}

void Network::restore_weights(const std::vector<std::vector<double>>& snap) {
    std::size_t i = 0;
    for (auto* layer : all_layers()) {
        if (auto* w = layer->weights()) *w = snap.at(i++);
        if (auto* b = layer->biases()) *b = snap.at(i++);
    }
    if (i != snap.size()) throw SimError("network: weight snapshot size mismatch");
}

nlohmann::json Network::arch_json() const {
    nlohmann::json j;
    j["family"] = family;
    j["input_channels"] = input_channels;
    j["input_length"] = input_length;
    j["n_outputs"] = n_outputs;
    j["trunk"] = nlohmann::json::array();
    for (const auto& l : trunk) j["trunk"].push_back(l->spec_json());
    j["branches"] = nlohmann::json::array();
    for (const auto& branch : branches) {
        nlohmann::json jb = nlohmann::json::array();
        for (const auto& l : branch) jb.push_back(l->spec_json());
        j["branches"].push_back(std::move(jb));
    }
    return j;
}

Network build_cnn(int input_length, int n_params, const CnnArch& arch) {
    if (n_params < 1) throw ConfigError("build_cnn: n_params must be >= 1");
    Network net;
    net.family = "cnn";
    net.input_channels = 2;
    net.input_length = input_length;
    net.n_outputs = n_params;
    net.trunk.push_back(make_conv1d(arch.trunk_filters1, arch.trunk_kernel1));
    net.trunk.push_back(make_relu());
    net.trunk.push_back(make_maxpool1d(arch.pool));
    net.trunk.push_back(make_conv1d(arch.trunk_filters2, arch.trunk_kernel2));
    net.trunk.push_back(make_relu());
    net.trunk.push_back(make_maxpool1d(arch.pool));
    for (int b = 0; b < n_params; ++b) {
        LayerStack branch;
        branch.push_back(make_conv1d(arch.branch_filters, arch.branch_kernel));
        branch.push_back(make_relu());
        branch.push_back(make_maxpool1d(arch.branch_pool));
        branch.push_back(make_flatten());
        branch.push_back(make_dense(arch.dense_units));
        branch.push_back(make_relu());
        branch.push_back(make_dropout(arch.dropout));
        branch.push_back(make_dense(1));
        net.branches.push_back(std::move(branch));
    }
    net.finalize();
    return net;
}

Network build_mlp(int input_length, int n_params, std::size_t target_params, double tolerance,
                  const MlpArch& arch) {
    if (n_params < 1) throw ConfigError("build_mlp: n_params must be >= 1");
    if (target_params == 0)
        target_params = build_cnn(input_length, n_params).parameter_count();

    const auto build_with_width = [&](int w) {
        Network net;
        net.family = "mlp";
        net.input_channels = 2;
        net.input_length = input_length;
        net.n_outputs = n_params;
        net.trunk.push_back(make_flatten());
        for (int h = 0; h < arch.hidden_layers; ++h) {
            net.trunk.push_back(make_dense(w));
            net.trunk.push_back(make_relu());
        }
        net.trunk.push_back(make_dropout(arch.dropout));
        net.trunk.push_back(make_dense(n_params));
        net.finalize();
        return net;
    };

    // parameter count is quadratic in the width; solve then refine locally
    const double u = 2.0 * input_length;
    const double hidden_pairs = std::max(0, arch.hidden_layers - 1);
    const double a = hidden_pairs;                       // w^2 terms
    const double b = u + arch.hidden_layers + n_params;  // w terms
    const double c = static_cast<double>(n_params) - static_cast<double>(target_params);
    double w_guess;
    if (a > 0.0)
        w_guess = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
    else
        w_guess = -c / b;
    int best_w = std::max(1, static_cast<int>(std::lround(w_guess)));
    std::size_t best_diff = std::numeric_limits<std::size_t>::max();
    int chosen = best_w;
    for (int w = std::max(1, best_w - 3); w <= best_w + 3; ++w) {
        Network probe = build_with_width(w);
        const std::size_t pc = probe.parameter_count();
        const std::size_t diff = pc > target_params ? pc - target_params : target_params - pc;
        if (diff < best_diff) {
            best_diff = diff;
            chosen = w;
        }
    }
    Network net = build_with_width(chosen);
    const auto pc = static_cast<double>(net.parameter_count());
    if (std::fabs(pc - static_cast<double>(target_params)) >
        tolerance * static_cast<double>(target_params))
        throw ConfigError("build_mlp: cannot match target parameter count within tolerance");
    return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const DatasetMeta& meta) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["arch"] = net.arch_json();
    nlohmann::json weights = nlohmann::json::array();
    for (const auto* layer : net.all_layers()) {
        nlohmann::json lw;
        if (auto* w = layer->weights()) lw["w"] = *w;
        if (auto* b = layer->biases()) lw["b"] = *b;
        weights.push_back(std::move(lw));
    }
    j["weights"] = std::move(weights);
    j["dataset_meta"] = to_json(meta);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("checkpoint: cannot write '" + path.string() + "'");
    out << j.dump() << '\n';
    if (!out) throw ConfigError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("checkpoint not found: '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint: parse error in '" + path.string() + "': " + e.what());
    }
    if (j.at("format_version").get<int>() != 1)
        throw ConfigError("checkpoint: unsupported format version");

    Checkpoint cp;
    const auto& arch = j.at("arch");
    cp.net.family = arch.at("family").get<std::string>();
    cp.net.input_channels = arch.at("input_channels").get<int>();
    cp.net.input_length = arch.at("input_length").get<int>();
    cp.net.n_outputs = arch.at("n_outputs").get<int>();
    for (const auto& lj : arch.at("trunk")) cp.net.trunk.push_back(layer_from_json(lj));
    for (const auto& bj : arch.at("branches")) {
        LayerStack branch;
        for (const auto& lj : bj) branch.push_back(layer_from_json(lj));
        cp.net.branches.push_back(std::move(branch));
    }
    cp.net.finalize();

    const auto& weights = j.at("weights");
    auto layers = cp.net.all_layers();
    if (weights.size() != layers.size())
        throw ConfigError("checkpoint: layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (auto* w = layers[i]->weights()) {
            auto loaded = weights[i].at("w").get<std::vector<double>>();
            if (loaded.size() != w->size())
                throw ConfigError("checkpoint: weight size mismatch at layer " + std::to_string(i));
            *w = std::move(loaded);
        }
        if (auto* b = layers[i]->biases()) {
            auto loaded = weights[i].at("b").get<std::vector<double>>();
            if (loaded.size() != b->size())
                throw ConfigError("checkpoint: bias size mismatch at layer " + std::to_string(i));
            *b = std::move(loaded);
        }
    }
    cp.meta = dataset_meta_from_json(j.at("dataset_meta"));
    return cp;
}

} // namespace pscal::nn
