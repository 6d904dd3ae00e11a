#include "pscal/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "pscal/common.hpp"
#include "pscal/dataset.hpp"
#include "pscal/rng.hpp"
#include "pscal/svg.hpp"

namespace pscal {

namespace {

// seed tags for the derived RNG streams
constexpr std::uint64_t kSplitTag = 50;
constexpr std::uint64_t kCnnInitTag = 101, kCnnTrainTag = 102;
constexpr std::uint64_t kMlpInitTag = 201, kMlpTrainTag = 202;

class StageTimer {
public:
    StageTimer(std::string stage, std::filesystem::path out_dir)
        : stage_(std::move(stage)), out_dir_(std::move(out_dir)),
          start_(std::chrono::steady_clock::now()) {}

    ~StageTimer() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        try {
            nlohmann::json j;
            const auto path = out_dir_ / "timings.json";
            if (std::filesystem::exists(path)) {
                std::ifstream in(path);
                if (in) in >> j;
            }
            j[stage_] = secs;
            std::ofstream out(path, std::ios::binary);
            out << j.dump(2) << '\n';
        } catch (...) {
            // timing is best-effort; never fail a stage over it
        }
    }

private:
    std::string stage_;
    std::filesystem::path out_dir_;
    std::chrono::steady_clock::time_point start_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string(what) + " not found: '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(what) + " parse error in '" + path.string() + "': " +
                          e.what());
    }
    return j;
}

Trajectory load_event(const PipelineConfig& cfg, bool require_pq) {
    Trajectory t = load_pmu_csv(cfg.event_path);
    if (require_pq && (!t.p || !t.q))
        throw ConfigError("event '" + cfg.event_path.string() +
                          "': measured p and q channels are required for this command");
    return t;
}

nlohmann::json score_json(const MismatchScore& s) {
    return {{"nrmse_p", s.nrmse_p}, {"nrmse_q", s.nrmse_q}, {"combined", s.combined}};
}

MismatchScore score_from_json(const nlohmann::json& j) {
    return {j.at("nrmse_p").get<double>(), j.at("nrmse_q").get<double>(),
            j.at("combined").get<double>()};
}

void write_compare_csv(const std::filesystem::path& path, const Trajectory& meas,
                       const std::vector<std::pair<std::string, const Trajectory*>>& sims) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << "t,p_meas,q_meas";
    for (const auto& [label, sim] : sims) out << ",p_" << label << ",q_" << label;
    out << '\n';
    for (std::size_t k = 0; k < meas.size(); ++k) {
        out << fmt_double(meas.time_at(k)) << ',' << fmt_double((*meas.p)[k]) << ','
            << fmt_double((*meas.q)[k]);
        for (const auto& [label, sim] : sims)
            out << ',' << fmt_double((*sim->p)[k]) << ',' << fmt_double((*sim->q)[k]);
        out << '\n';
    }
}

void write_compare_svg(const std::filesystem::path& path, const std::string& title,
                       const Trajectory& meas,
                       const std::vector<std::pair<std::string, const Trajectory*>>& sims) {
    std::vector<double> t(meas.size());
    for (std::size_t k = 0; k < meas.size(); ++k) t[k] = meas.time_at(k);
    LinePlot plot(title, "time [s]", "power [pu]");
    plot.add_series("P measured", t, *meas.p);
    plot.add_series("Q measured", t, *meas.q);
    for (const auto& [label, sim] : sims) {
        plot.add_series("P " + label, t, *sim->p);
        plot.add_series("Q " + label, t, *sim->q);
    }
    plot.write(path);
}

std::vector<std::string> selected_names(const PipelineConfig& cfg) {
    const auto sens_path = cfg.out_dir / "sensitivity.json";
    if (std::filesystem::exists(sens_path)) {
        const auto j = read_json(sens_path, "sensitivity report");
        auto sel = j.at("selected").get<std::vector<std::string>>();
        if (!sel.empty()) return sel;
    }
    if (!cfg.params.empty()) return cfg.params;
    throw ConfigError("no calibration targets: run the sensitivity stage first or set \"params\"");
}

std::vector<double> deviation_waveform(const Trajectory& event) {
    const std::size_t m = event.size();
    std::vector<double> w(2 * m);
    for (std::size_t k = 0; k < m; ++k) {
        w[k] = (*event.p)[k] - (*event.p)[0];
        w[m + k] = (*event.q)[k] - (*event.q)[0];
    }
    return w;
}

std::string fixed4(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

} // namespace

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    const auto j = read_json(path, "pipeline config");
    if (!j.is_object()) throw ConfigError("pipeline config: document must be an object");
    static const std::set<std::string> kKeys = {"model", "event",   "out",     "params",
                                                "n",     "seed",    "noise_std", "workers",
                                                "baseline", "thresholds", "train", "dt_max"};
    for (const auto& item : j.items())
        if (!kKeys.count(item.key()))
            throw ConfigError("pipeline config: unknown field '" + item.key() + "'");

    PipelineConfig cfg;
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    cfg.model_path = resolve(j.at("model").get<std::string>());
    cfg.event_path = resolve(j.at("event").get<std::string>());
    if (j.contains("out")) cfg.out_dir = resolve(j.at("out").get<std::string>());
    if (j.contains("params")) cfg.params = j.at("params").get<std::vector<std::string>>();
    if (j.contains("n")) cfg.n = j.at("n").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise_std")) cfg.noise_std = j.at("noise_std").get<double>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<unsigned>();
    if (j.contains("baseline")) cfg.baseline = j.at("baseline").get<bool>();
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        static const std::set<std::string> kThKeys = {"mismatch", "keep_ratio", "delta_fraction"};
        for (const auto& item : t.items())
            if (!kThKeys.count(item.key()))
                throw ConfigError("pipeline config: unknown threshold '" + item.key() + "'");
        if (t.contains("mismatch")) cfg.thresholds.mismatch = t.at("mismatch").get<double>();
        if (t.contains("keep_ratio")) cfg.thresholds.keep_ratio = t.at("keep_ratio").get<double>();
        if (t.contains("delta_fraction"))
            cfg.thresholds.delta_fraction = t.at("delta_fraction").get<double>();
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        static const std::set<std::string> kTrKeys = {"epochs",  "batch_size", "learning_rate",
                                                      "patience", "beta1",     "beta2", "eps"};
        for (const auto& item : t.items())
            if (!kTrKeys.count(item.key()))
                throw ConfigError("pipeline config: unknown train field '" + item.key() + "'");
        if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
        if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<int>();
        if (t.contains("learning_rate"))
            cfg.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("patience")) cfg.train.patience = t.at("patience").get<int>();
        if (t.contains("beta1")) cfg.train.beta1 = t.at("beta1").get<double>();
        if (t.contains("beta2")) cfg.train.beta2 = t.at("beta2").get<double>();
        if (t.contains("eps")) cfg.train.eps = t.at("eps").get<double>();
    }
    if (j.contains("dt_max")) cfg.playback.dt_max = j.at("dt_max").get<double>();

    if (cfg.n < 1) throw ConfigError("pipeline config: n must be >= 1");
    for (const auto& [p, what] : {std::pair{cfg.model_path, "model"}, {cfg.event_path, "event"}}) {
        if (!std::filesystem::exists(p))
            throw ConfigError("pipeline config: " + std::string(what) + " file '" + p.string() +
                              "' does not exist");
    }
    return cfg;
}

int cmd_validate(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    StageTimer timer("validate", cfg.out_dir);

    const ModelConfig model = ModelConfig::from_file(cfg.model_path);
    const Trajectory event = load_event(cfg, /*require_pq=*/true);
    const Trajectory sim = playback(model, {}, event, cfg.playback);
    const MismatchScore score = mismatch(sim, event);
    const bool verdict = needs_calibration(score, cfg.thresholds.mismatch);

    nlohmann::json j;
    j["score"] = score_json(score);
    j["threshold"] = cfg.thresholds.mismatch;
    j["needs_calibration"] = verdict;
    write_json(cfg.out_dir / "validation.json", j);
    write_compare_csv(cfg.out_dir / "validate_compare.csv", event, {{"sim", &sim}});
    write_compare_svg(cfg.out_dir / "validate_compare.svg",
                      "Event playback: measured vs simulated", event, {{"sim", &sim}});

    std::cout << "validate: combined NRMSE " << fixed4(score.combined) << " (P "
              << fixed4(score.nrmse_p) << ", Q " << fixed4(score.nrmse_q) << "), threshold "
              << fmt_double(cfg.thresholds.mismatch) << " -> "
              << (verdict ? "calibration needed" : "no calibration needed") << "\n";
    return verdict ? kExitCalibrationNeeded : kExitOk;
}

int cmd_sensitivity(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    StageTimer timer("sensitivity", cfg.out_dir);

    const ModelConfig model = ModelConfig::from_file(cfg.model_path);
    const Trajectory event = load_event(cfg, /*require_pq=*/false);
    ParameterSet ps = model.parameter_set();
    if (!cfg.params.empty()) ps = ps.subset(cfg.params);

    SensitivityOptions opt;
    opt.delta_fraction = cfg.thresholds.delta_fraction;
    opt.keep_ratio = cfg.thresholds.keep_ratio;
    opt.workers = cfg.workers;
    opt.playback = cfg.playback;
    const SensitivityResult res = rank_parameters(model, event, ps, opt);

    write_json(cfg.out_dir / "sensitivity.json", to_json(res));

    std::cout << "sensitivity (delta " << fmt_double(opt.delta_fraction) << "):\n";
    for (const auto& item : res.results)
        std::cout << "  " << item.name << "  S=" << fmt_double(item.s) << "\n";
    for (const auto& name : res.unscreenable)
        std::cout << "  " << name << "  unscreenable (zero base value)\n";
    std::cout << "selected:";
    for (const auto& name : res.selected) std::cout << ' ' << name;
    std::cout << "\n";
    return kExitOk;
}

int cmd_generate(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    StageTimer timer("generate", cfg.out_dir);

    const ModelConfig model = ModelConfig::from_file(cfg.model_path);
    const Trajectory event = load_event(cfg, /*require_pq=*/false);
    const std::vector<std::string> names = selected_names(cfg);

    Dataset ds = generate_dataset(model, event, names, cfg.n, cfg.seed, cfg.noise_std,
                                  cfg.workers, cfg.playback, cfg.event_path.filename().string());
    ds.split = split_dataset(ds, {0.81, 0.09, 0.10}, derive_seed(cfg.seed, kSplitTag));
    normalize_inputs(ds);
    save_dataset(ds, cfg.out_dir / "dataset");

    std::cout << "generate: " << ds.n << " samples (" << ds.split->train.size() << "/"
              << ds.split->val.size() << "/" << ds.split->test.size()
              << " train/val/test), targets:";
    for (const auto& name : names) std::cout << ' ' << name;
    std::cout << "\n";
    return kExitOk;
}

namespace {

void write_loss_curves(const PipelineConfig& cfg, const nn::TrainingReport& cnn,
                       const nn::TrainingReport* mlp) {
    {
        std::ofstream out(cfg.out_dir / "loss_curves.csv", std::ios::binary);
        if (!out) throw ConfigError("cannot write loss_curves.csv");
        out << "epoch,cnn_train,cnn_val";
        if (mlp) out << ",mlp_train,mlp_val";
        out << '\n';
        const std::size_t rows = std::max(cnn.train_loss.size(),
                                          mlp ? mlp->train_loss.size() : std::size_t(0));
        for (std::size_t e = 0; e < rows; ++e) {
            out << (e + 1);
            auto cell = [&](const std::vector<double>& v) {
                out << ',';
                if (e < v.size()) out << fmt_double(v[e]);
            };
            cell(cnn.train_loss);
            cell(cnn.val_loss);
            if (mlp) {
                cell(mlp->train_loss);
                cell(mlp->val_loss);
            }
            out << '\n';
        }
    }
    LinePlot plot("Training and validation normalized loss", "epoch", "normalized RMS loss");
    auto epochs_axis = [](std::size_t n) {
        std::vector<double> e(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = static_cast<double>(i + 1);
        return e;
    };
    plot.add_series("CNN train", epochs_axis(cnn.train_loss.size()), cnn.train_loss);
    plot.add_series("CNN validation", epochs_axis(cnn.val_loss.size()), cnn.val_loss);
    if (mlp) {
        plot.add_series("MLP train", epochs_axis(mlp->train_loss.size()), mlp->train_loss);
        plot.add_series("MLP validation", epochs_axis(mlp->val_loss.size()), mlp->val_loss);
    }
    plot.write(cfg.out_dir / "loss_curves.svg");
}

} // namespace

int cmd_train(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    StageTimer timer("train", cfg.out_dir);

    const auto ds_dir = cfg.out_dir / "dataset";
    if (!std::filesystem::exists(ds_dir / "meta.json"))
        throw ConfigError("dataset not found in '" + ds_dir.string() + "': run generate first");
    Dataset ds = load_dataset(ds_dir);
    if (!ds.split) throw ConfigError("dataset has no split metadata");

    const int m = static_cast<int>(ds.meta.waveform_len);
    const int k = static_cast<int>(ds.k());

    nn::TrainConfig tc = cfg.train;
    tc.workers = cfg.workers;

    nn::Network cnn = nn::build_cnn(m, k);
    cnn.init_weights(derive_seed(cfg.seed, kCnnInitTag));
    tc.rng_seed = derive_seed(cfg.seed, kCnnTrainTag);
    nn::TrainingReport cnn_report = nn::train(cnn, ds, *ds.split, tc);
    nn::save_checkpoint(cfg.out_dir / "cnn_checkpoint.json", cnn, ds.meta);
    write_json(cfg.out_dir / "cnn_training_report.json", cnn_report.to_json());
    std::cout << "train cnn: " << cnn_report.train_loss.size() << " epochs, best epoch "
              << cnn_report.best_epoch << ", best val loss " << fixed4(cnn_report.best_val_loss)
              << " (x" << fmt_double(cnn_report.loss_norm) << "), " << fixed4(cnn_report.wall_seconds)
              << " s\n";

    if (cfg.baseline) {
        nn::Network mlp = nn::build_mlp(m, k);
        mlp.init_weights(derive_seed(cfg.seed, kMlpInitTag));
        tc.rng_seed = derive_seed(cfg.seed, kMlpTrainTag);
        nn::TrainingReport mlp_report = nn::train(mlp, ds, *ds.split, tc);
        nn::save_checkpoint(cfg.out_dir / "mlp_checkpoint.json", mlp, ds.meta);
        write_json(cfg.out_dir / "mlp_training_report.json", mlp_report.to_json());
        std::cout << "train mlp: " << mlp_report.train_loss.size() << " epochs, best epoch "
                  << mlp_report.best_epoch << ", best val loss "
                  << fixed4(mlp_report.best_val_loss) << ", " << fixed4(mlp_report.wall_seconds)
                  << " s\n";
        write_loss_curves(cfg, cnn_report, &mlp_report);
    } else {
        write_loss_curves(cfg, cnn_report, nullptr);
    }
    return kExitOk;
}

int cmd_predict(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    StageTimer timer("predict", cfg.out_dir);

    const auto cp_path = cfg.out_dir / "cnn_checkpoint.json";
    if (!std::filesystem::exists(cp_path))
        throw ConfigError("checkpoint not found: '" + cp_path.string() + "' (run train first)");
    const nn::Checkpoint cnn_cp = nn::load_checkpoint(cp_path);

    const ModelConfig model = ModelConfig::from_file(cfg.model_path);
    const Trajectory event = load_event(cfg, /*require_pq=*/true);
    if (event.size() != cnn_cp.meta.waveform_len)
        throw ConfigError("event length does not match the trained waveform length");

    const std::vector<double> waveform = deviation_waveform(event);
    const nn::Prediction cnn_pred = nn::predict(cnn_cp.net, waveform, cnn_cp.meta);

    const Trajectory sim_orig = playback(model, {}, event, cfg.playback);
    const MismatchScore pre = mismatch(sim_orig, event);

    ParamAssignment cnn_assign;
    for (std::size_t j = 0; j < cnn_cp.meta.names.size(); ++j)
        cnn_assign[cnn_cp.meta.names[j]] = cnn_pred.values[j];
    const Trajectory sim_cnn = playback(model, cnn_assign, event, cfg.playback);
    const MismatchScore post = mismatch(sim_cnn, event);

    // optional MLP side-by-side
    bool have_mlp = std::filesystem::exists(cfg.out_dir / "mlp_checkpoint.json");
    nn::Prediction mlp_pred;
    Trajectory sim_mlp;
    MismatchScore post_mlp;
    if (have_mlp) {
        const nn::Checkpoint mlp_cp = nn::load_checkpoint(cfg.out_dir / "mlp_checkpoint.json");
        mlp_pred = nn::predict(mlp_cp.net, waveform, mlp_cp.meta);
        ParamAssignment mlp_assign;
        for (std::size_t j = 0; j < mlp_cp.meta.names.size(); ++j)
            mlp_assign[mlp_cp.meta.names[j]] = mlp_pred.values[j];
        sim_mlp = playback(model, mlp_assign, event, cfg.playback);
        post_mlp = mismatch(sim_mlp, event);
    }

    nlohmann::json j;
    j["pre_mismatch"] = score_json(pre);
    j["post_mismatch"] = score_json(post);
    if (have_mlp) j["post_mismatch_mlp"] = score_json(post_mlp);
    j["threshold"] = cfg.thresholds.mismatch;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < cnn_cp.meta.names.size(); ++i) {
        nlohmann::json row;
        row["name"] = cnn_cp.meta.names[i];
        row["original"] = model.value_of(cnn_cp.meta.names[i]);
        row["cnn_predicted"] = cnn_pred.values[i];
        row["cnn_clamped"] = static_cast<bool>(cnn_pred.clamped[i]);
        if (have_mlp) {
            row["mlp_predicted"] = mlp_pred.values[i];
            row["mlp_clamped"] = static_cast<bool>(mlp_pred.clamped[i]);
        }
        rows.push_back(std::move(row));
    }
    j["parameters"] = std::move(rows);
    if (std::filesystem::exists(cfg.out_dir / "sensitivity.json"))
        j["sensitivity"] = read_json(cfg.out_dir / "sensitivity.json", "sensitivity report");
    nlohmann::json artifacts = {{"compare_csv", "calibrated_compare.csv"},
                                {"compare_svg", "calibrated_compare.svg"},
                                {"timings", "timings.json"}};
    j["artifacts"] = std::move(artifacts);
    write_json(cfg.out_dir / "calibration_report.json", j);

    std::vector<std::pair<std::string, const Trajectory*>> sims = {{"original", &sim_orig},
                                                                   {"cnn", &sim_cnn}};
    if (have_mlp) sims.push_back({"mlp", &sim_mlp});
    write_compare_csv(cfg.out_dir / "calibrated_compare.csv", event, sims);
    write_compare_svg(cfg.out_dir / "calibrated_compare.svg",
                      "Re-validation: measured vs calibrated playback", event, sims);

    std::cout << "predict: pre-calibration NRMSE " << fixed4(pre.combined)
              << ", post-calibration " << fixed4(post.combined);
    if (have_mlp) std::cout << " (mlp " << fixed4(post_mlp.combined) << ")";
    std::cout << "\n";
    for (std::size_t i = 0; i < cnn_cp.meta.names.size(); ++i) {
        std::cout << "  " << cnn_cp.meta.names[i] << ": "
                  << fmt_double(model.value_of(cnn_cp.meta.names[i])) << " -> "
                  << fmt_double(cnn_pred.values[i])
                  << (cnn_pred.clamped[i] ? " (clamped)" : "") << "\n";
    }
    return kExitOk;
}

int cmd_report(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    StageTimer timer("report", cfg.out_dir);

    std::vector<std::string> missing;
    auto need = [&](const std::string& rel) {
        if (!std::filesystem::exists(cfg.out_dir / rel)) missing.push_back(rel);
    };
    need("validation.json");
    need("sensitivity.json");
    need("dataset/meta.json");
    need("cnn_training_report.json");
    need("calibration_report.json");
    if (!missing.empty()) {
        std::string msg = "report: missing artifacts:";
        for (const auto& m : missing) msg += " " + m;
        throw ConfigError(msg);
    }

    const auto validation = read_json(cfg.out_dir / "validation.json", "validation report");
    const auto sensitivity = read_json(cfg.out_dir / "sensitivity.json", "sensitivity report");
    const auto calib = read_json(cfg.out_dir / "calibration_report.json", "calibration report");
    const auto cnn_report = nn::TrainingReport::from_json(
        read_json(cfg.out_dir / "cnn_training_report.json", "training report"));
    const bool have_mlp = std::filesystem::exists(cfg.out_dir / "mlp_training_report.json");
    nn::TrainingReport mlp_report;
    if (have_mlp)
        mlp_report = nn::TrainingReport::from_json(
            read_json(cfg.out_dir / "mlp_training_report.json", "training report"));

    std::ostringstream md;
    md << "# Calibration report\n\n";

    const auto pre = score_from_json(calib.at("pre_mismatch"));
    const auto post = score_from_json(calib.at("post_mismatch"));
    md << "## Event playback validation\n\n";
    md << "- pre-calibration combined NRMSE: **" << fixed4(pre.combined) << "** (P "
       << fixed4(pre.nrmse_p) << ", Q " << fixed4(pre.nrmse_q) << ")\n";
    md << "- verdict at threshold " << fmt_double(validation.at("threshold").get<double>())
       << ": **"
       << (validation.at("needs_calibration").get<bool>() ? "calibration needed"
                                                          : "no calibration needed")
       << "**\n\n";

    md << "## Sensitivity screening\n\n";
    md << "| parameter | S | base value |\n|---|---|---|\n";
    for (const auto& item : sensitivity.at("results"))
        md << "| " << item.at("name").get<std::string>() << " | "
           << fmt_double(item.at("S").get<double>()) << " | "
           << fmt_double(item.at("p0").get<double>()) << " |\n";
    md << "\nselected:";
    for (const auto& s : sensitivity.at("selected")) md << " `" << s.get<std::string>() << "`";
    md << "\n\n";

    md << "## Test-split error statistics (% of base value)\n\n";
    if (have_mlp) {
        md << "| parameter | MLP mean | MLP max | CNN mean | CNN max |\n|---|---|---|---|---|\n";
        for (std::size_t i = 0; i < cnn_report.names.size(); ++i)
            md << "| " << cnn_report.names[i] << " | " << fixed4(mlp_report.test_mean_pct_err[i])
               << " | " << fixed4(mlp_report.test_max_pct_err[i]) << " | "
               << fixed4(cnn_report.test_mean_pct_err[i]) << " | "
               << fixed4(cnn_report.test_max_pct_err[i]) << " |\n";
    } else {
        md << "| parameter | CNN mean | CNN max |\n|---|---|---|\n";
        for (std::size_t i = 0; i < cnn_report.names.size(); ++i)
            md << "| " << cnn_report.names[i] << " | " << fixed4(cnn_report.test_mean_pct_err[i])
               << " | " << fixed4(cnn_report.test_max_pct_err[i]) << " |\n";
    }
    md << "\n";

    md << "## Calibrated parameters\n\n";
    if (have_mlp)
        md << "| parameter | original | CNN-predicted | MLP-predicted |\n|---|---|---|---|\n";
    else
        md << "| parameter | original | CNN-predicted |\n|---|---|---|\n";
    for (const auto& row : calib.at("parameters")) {
        md << "| " << row.at("name").get<std::string>() << " | "
           << fixed4(row.at("original").get<double>()) << " | "
           << fixed4(row.at("cnn_predicted").get<double>());
        if (have_mlp) md << " | " << fixed4(row.at("mlp_predicted").get<double>());
        md << " |\n";
    }
    md << "\n";

    md << "## Re-validation\n\n";
    md << "- post-calibration combined NRMSE (CNN): **" << fixed4(post.combined) << "**\n";
    if (calib.contains("post_mismatch_mlp"))
        md << "- post-calibration combined NRMSE (MLP): "
           << fixed4(score_from_json(calib.at("post_mismatch_mlp")).combined) << "\n";
    if (pre.combined > 0.0)
        md << "- improvement factor: " << fixed4(pre.combined / std::max(post.combined, 1e-12))
           << "x\n";
    md << "\n";

    md << "## Artifacts\n\n";
    md << "- [validate_compare.svg](validate_compare.svg)\n";
    md << "- [calibrated_compare.svg](calibrated_compare.svg)\n";
    md << "- [loss_curves.svg](loss_curves.svg), [loss_curves.csv](loss_curves.csv)\n";
    md << "- [validate_compare.csv](validate_compare.csv), "
          "[calibrated_compare.csv](calibrated_compare.csv)\n";
    md << "- dataset/ (meta.json, inputs.csv, targets.csv)\n";
    md << "- cnn_checkpoint.json";
    if (have_mlp) md << ", mlp_checkpoint.json";
    md << "\n- timings.json (wall times; regenerated every run)\n";

    std::ofstream out(cfg.out_dir / "report.md", std::ios::binary);
    if (!out) throw ConfigError("cannot write report.md");
    out << md.str();
    std::cout << "report: wrote " << (cfg.out_dir / "report.md").string() << "\n";
    return kExitOk;
}

int cmd_pipeline(const PipelineConfig& cfg) {
    StageTimer timer("pipeline", cfg.out_dir);
    const int verdict = cmd_validate(cfg);
    if (verdict == kExitOk)
        std::cout << "pipeline: model already matches the event; continuing anyway\n";
    cmd_sensitivity(cfg);
    cmd_generate(cfg);
    cmd_train(cfg);
    cmd_predict(cfg);
    cmd_report(cfg);
    return kExitOk;
}

} // namespace pscal
