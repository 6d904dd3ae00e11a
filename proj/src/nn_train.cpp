#include "pscal/nn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "pscal/common.hpp"
#include "pscal/parallel.hpp"
#include "pscal/rng.hpp"

namespace pscal::nn {

nlohmann::json TrainingReport::to_json() const {
    nlohmann::json j;
    j["train_loss"] = train_loss;
    j["val_loss"] = val_loss;
    j["loss_norm"] = loss_norm;
    j["best_epoch"] = best_epoch;
    j["best_val_loss"] = best_val_loss;
    j["names"] = names;
    j["test_mean_pct_err"] = test_mean_pct_err;
    j["test_max_pct_err"] = test_max_pct_err;
    return j;
}

TrainingReport TrainingReport::from_json(const nlohmann::json& j) {
    TrainingReport r;
    r.train_loss = j.at("train_loss").get<std::vector<double>>();
    r.val_loss = j.at("val_loss").get<std::vector<double>>();
    r.loss_norm = j.at("loss_norm").get<double>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.best_val_loss = j.at("best_val_loss").get<double>();
    r.names = j.at("names").get<std::vector<std::string>>();
    r.test_mean_pct_err = j.at("test_mean_pct_err").get<std::vector<double>>();
    r.test_max_pct_err = j.at("test_max_pct_err").get<std::vector<double>>();
    return r;
}

std::pair<double, std::vector<double>> rms_loss(const std::vector<double>& pred,
                                                const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw ConfigError("rms_loss: empty batch or shape mismatch");
    const auto n = static_cast<double>(pred.size());
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - target[i];
        sum_sq += r * r;
    }
    const double loss = std::sqrt(sum_sq / n);
    std::vector<double> grad(pred.size(), 0.0);
    if (loss > 0.0) {
        const double f = 1.0 / (n * loss);
        for (std::size_t i = 0; i < pred.size(); ++i) grad[i] = f * (pred[i] - target[i]);
    }
    return {loss, std::move(grad)};
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    long t = 0;
};

AdamState make_adam(const Network& net) {
    AdamState st;
    for (const auto* layer : net.all_layers()) {
        const std::size_t nw = layer->weights() ? layer->weights()->size() : 0;
        const std::size_t nb = layer->biases() ? layer->biases()->size() : 0;
        st.mw.emplace_back(nw, 0.0);
        st.vw.emplace_back(nw, 0.0);
        st.mb.emplace_back(nb, 0.0);
        st.vb.emplace_back(nb, 0.0);
    }
    return st;
}

void adam_update(Network& net, AdamState& st, const std::vector<LayerGrad>& grads,
                 const TrainConfig& cfg) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    auto layers = net.all_layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        auto step = [&](std::vector<double>* param, const std::vector<double>& g,
                        std::vector<double>& m, std::vector<double>& v) {
            if (!param) return;
            for (std::size_t i = 0; i < param->size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                (*param)[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        };
        step(layers[li]->weights(), grads[li].w, st.mw[li], st.vw[li]);
        step(layers[li]->biases(), grads[li].b, st.mb[li], st.vb[li]);
    }
}

void load_input(const Dataset& ds, std::size_t row, Signal& sig) {
    const std::size_t m = ds.meta.waveform_len;
    if (sig.channels != 2 || sig.length != static_cast<int>(m)) sig.resize(2, static_cast<int>(m));
    const double* r = ds.input_row(row);
    std::copy(r, r + 2 * m, sig.v.begin());
}

/// Eval-mode RMS loss over a set of rows; forward passes may run in
/// parallel, the reduction is sequential in index order.
double eval_loss(const Network& net, const Dataset& ds, const std::vector<std::size_t>& rows,
                 std::vector<Network::Ws>& slots, std::vector<Signal>& slot_in,
                 unsigned workers) {
    const std::size_t k = ds.k();
    std::vector<double> preds(rows.size() * k);
    const std::size_t nslots = slots.size();
    for (std::size_t base = 0; base < rows.size(); base += nslots) {
        const std::size_t cnt = std::min(nslots, rows.size() - base);
        parallel_for(cnt, workers, [&](std::size_t s) {
            load_input(ds, rows[base + s], slot_in[s]);
            FwdCtx ctx; // eval mode
            net.forward(slot_in[s], slots[s], ctx);
            std::copy(slots[s].preds.begin(), slots[s].preds.end(),
                      preds.begin() + (base + s) * k);
        });
    }
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* t = ds.target_row(rows[i]);
        for (std::size_t j = 0; j < k; ++j) {
            const double r = preds[i * k + j] - t[j];
            sum_sq += r * r;
        }
    }
    return std::sqrt(sum_sq / static_cast<double>(rows.size() * k));
}

/// Pairwise in-place tree reduction of per-slot gradients; the combination
/// order depends only on the slot count, never on threading.
void tree_reduce(std::vector<std::vector<LayerGrad>>& slot_grads, std::size_t count) {
    for (std::size_t stride = 1; stride < count; stride *= 2) {
        for (std::size_t i = 0; i + stride < count; i += 2 * stride) {
            auto& dst = slot_grads[i];
            const auto& src = slot_grads[i + stride];
            for (std::size_t li = 0; li < dst.size(); ++li) {
                for (std::size_t j = 0; j < dst[li].w.size(); ++j) dst[li].w[j] += src[li].w[j];
                for (std::size_t j = 0; j < dst[li].b.size(); ++j) dst[li].b[j] += src[li].b[j];
            }
        }
    }
}

} // namespace

TrainingReport train(Network& net, const Dataset& ds, const Split& split,
                     const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate >= 0.0))
        throw ConfigError("train: invalid configuration");
    if (!ds.meta.normalized)
        throw ConfigError("train: dataset inputs are not normalized");
    if (split.train.empty() || split.val.empty())
        throw ConfigError("train: split must provide train and validation rows");
    if (static_cast<int>(ds.meta.waveform_len) != net.input_length ||
        ds.k() != static_cast<std::size_t>(net.n_outputs))
        throw ConfigError("train: dataset and network dimensions disagree");

    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t k = ds.k();
    const auto nslots = static_cast<std::size_t>(cfg.batch_size);

    std::vector<Network::Ws> slots;
    std::vector<Signal> slot_in(nslots);
    std::vector<std::vector<LayerGrad>> slot_grads;
    slots.reserve(nslots);
    for (std::size_t s = 0; s < nslots; ++s) {
        slots.push_back(net.make_ws());
        slot_grads.push_back(net.make_grads());
    }
    AdamState adam = make_adam(net);

    Rng shuffle_rng(derive_seed(cfg.rng_seed, 0xA11CEuLL));
    const std::uint64_t mask_seed = derive_seed(cfg.rng_seed, 0xD809uLL);

    TrainingReport report;
    report.names = ds.meta.names;

    const double val0 = eval_loss(net, ds, split.val, slots, slot_in, cfg.workers);
    report.loss_norm = val0 > 0.0 ? val0 : 1.0;

    double best_val_raw = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_weights = net.snapshot_weights();
    int best_epoch = 0;
    int since_best = 0;

    std::vector<std::size_t> order(split.train);
    std::vector<double> batch_pred, batch_target;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss_sum = 0.0;
        std::size_t batch_count = 0;

        for (std::size_t base = 0; base < order.size(); base += nslots) {
            const std::size_t bs = std::min(nslots, order.size() - base);
            const std::uint64_t batch_tag =
                static_cast<std::uint64_t>(epoch) * 1000000uLL + batch_count;

            // phase 1: forward (train mode, per-sample dropout streams)
            parallel_for(bs, cfg.workers, [&](std::size_t s) {
                load_input(ds, order[base + s], slot_in[s]);
                Rng rng(derive_seed(mask_seed, batch_tag, s));
                FwdCtx ctx;
                ctx.train = true;
                ctx.rng = &rng;
                net.forward(slot_in[s], slots[s], ctx);
            });

            batch_pred.assign(bs * k, 0.0);
            batch_target.assign(bs * k, 0.0);
            for (std::size_t s = 0; s < bs; ++s) {
                std::copy(slots[s].preds.begin(), slots[s].preds.end(),
                          batch_pred.begin() + s * k);
                const double* t = ds.target_row(order[base + s]);
                std::copy(t, t + k, batch_target.begin() + s * k);
            }
            auto [loss, grad] = rms_loss(batch_pred, batch_target);
            if (!std::isfinite(loss))
                throw SimError("train: non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch_count));
            epoch_loss_sum += loss;
            ++batch_count;

            // phase 2: backward per sample, then deterministic reduction
            parallel_for(bs, cfg.workers, [&](std::size_t s) {
                for (auto& g : slot_grads[s]) g.zero();
                std::vector<double> dpred(grad.begin() + s * k, grad.begin() + (s + 1) * k);
                net.backward(slot_in[s], slots[s], dpred, slot_grads[s]);
            });
            tree_reduce(slot_grads, bs);
            adam_update(net, adam, slot_grads[0], cfg);
        }

        const double train_loss = epoch_loss_sum / static_cast<double>(batch_count);
        const double val = eval_loss(net, ds, split.val, slots, slot_in, cfg.workers);
        if (!std::isfinite(val))
            throw SimError("train: non-finite validation loss at epoch " + std::to_string(epoch));
        report.train_loss.push_back(train_loss / report.loss_norm);
        report.val_loss.push_back(val / report.loss_norm);

        if (val < best_val_raw) {
            best_val_raw = val;
            best_weights = net.snapshot_weights();
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (cfg.patience > 0 && since_best >= cfg.patience) break;
        }
    }

    net.restore_weights(best_weights);
    report.best_epoch = best_epoch;
    report.best_val_loss =
        std::isfinite(best_val_raw) ? best_val_raw / report.loss_norm : 0.0;

    // test metrics: absolute error as percent of the base value
    if (!split.test.empty()) {
        report.test_mean_pct_err.assign(k, 0.0);
        report.test_max_pct_err.assign(k, 0.0);
        FwdCtx ctx;
        auto ws = net.make_ws();
        Signal in;
        for (std::size_t row : split.test) {
            load_input(ds, row, in);
            net.forward(in, ws, ctx);
            const double* t = ds.target_row(row);
            for (std::size_t j = 0; j < k; ++j) {
                const double span = ds.meta.upper_factors[j] - ds.meta.lower_factors[j];
                const double pred_v = ws.preds[j] * span * ds.meta.bases[j] +
                                      ds.meta.lower_factors[j] * ds.meta.bases[j];
                const double true_v = t[j] * span * ds.meta.bases[j] +
                                      ds.meta.lower_factors[j] * ds.meta.bases[j];
                const double pct = 100.0 * std::fabs(pred_v - true_v) /
                                   std::fabs(ds.meta.bases[j]);
                report.test_mean_pct_err[j] += pct;
                report.test_max_pct_err[j] = std::max(report.test_max_pct_err[j], pct);
            }
        }
        for (std::size_t j = 0; j < k; ++j)
            report.test_mean_pct_err[j] /= static_cast<double>(split.test.size());
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

Prediction predict(const Network& net, const std::vector<double>& waveform,
                   const DatasetMeta& meta) {
    if (!meta.normalized) throw ConfigError("predict: normalization stats missing");
    if (waveform.size() != 2 * meta.waveform_len)
        throw ConfigError("predict: waveform length mismatch");
    if (meta.names.size() != static_cast<std::size_t>(net.n_outputs))
        throw ConfigError("predict: network outputs do not match parameter names");

    std::vector<double> w = waveform;
    apply_input_stats(meta, w);
    Signal in(2, static_cast<int>(meta.waveform_len));
    in.v = std::move(w);

    auto ws = net.make_ws();
    FwdCtx ctx; // eval mode: dropout inert, no rng consumed
    net.forward(in, ws, ctx);

    Prediction out;
    out.raw_normalized = ws.preds;
    for (std::size_t j = 0; j < meta.names.size(); ++j) {
        const double raw = ws.preds[j];
        const bool clamp = raw < 0.0 || raw > 1.0;
        const double bounded = std::clamp(raw, 0.0, 1.0);
        out.values.push_back(denormalize_target(bounded, meta.bases[j], meta.lower_factors[j],
                                                meta.upper_factors[j]));
        out.clamped.push_back(clamp);
    }
    return out;
}

} // namespace pscal::nn
