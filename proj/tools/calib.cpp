#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pscal/common.hpp"
#include "pscal/pipeline.hpp"

namespace {

struct GlobalOpts {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned workers = 0;
    bool workers_set = false;
    bool baseline = false;
};

pscal::PipelineConfig load_config(const GlobalOpts& g) {
    if (g.config.empty())
        throw pscal::ConfigError("--config <file> is required");
    pscal::PipelineConfig cfg = pscal::PipelineConfig::from_file(g.config);
    if (!g.out.empty()) cfg.out_dir = g.out;
    if (g.seed_set) cfg.seed = g.seed;
    if (g.workers_set) cfg.workers = g.workers;
    if (g.baseline) cfg.baseline = true;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability-model parameter calibration pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config, "pipeline config JSON")->expected(1);
    app.add_option("--out", g.out, "output directory (overrides config)");
    app.add_option("--seed", g.seed, "RNG seed (overrides config)")
        ->each([&](const std::string&) { g.seed_set = true; });
    app.add_option("--workers", g.workers, "worker thread cap (overrides config)")
        ->each([&](const std::string&) { g.workers_set = true; });
    app.add_flag("--baseline", g.baseline, "also train/predict with the MLP baseline");

    auto* validate = app.add_subcommand("validate", "event playback and mismatch verdict");
    auto* sensitivity = app.add_subcommand("sensitivity", "rank parameters by trajectory sensitivity");
    auto* generate = app.add_subcommand("generate", "generate the labeled training dataset");
    auto* train = app.add_subcommand("train", "train the CNN (and MLP with --baseline)");
    auto* predict = app.add_subcommand("predict", "predict parameters and re-validate");
    auto* report = app.add_subcommand("report", "write the markdown summary");
    auto* pipeline = app.add_subcommand("pipeline", "run all stages in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pscal::kExitUsage;
    }

    try {
        const pscal::PipelineConfig cfg = load_config(g);
        if (validate->parsed()) return pscal::cmd_validate(cfg);
        if (sensitivity->parsed()) return pscal::cmd_sensitivity(cfg);
        if (generate->parsed()) return pscal::cmd_generate(cfg);
        if (train->parsed()) return pscal::cmd_train(cfg);
        if (predict->parsed()) return pscal::cmd_predict(cfg);
        if (report->parsed()) return pscal::cmd_report(cfg);
        if (pipeline->parsed()) return pscal::cmd_pipeline(cfg);
        return pscal::kExitUsage;
    } catch (const pscal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return pscal::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pscal::kExitFailure;
    }
}
