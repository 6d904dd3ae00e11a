#include "pscal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pscal/common.hpp"
#include "pscal/parallel.hpp"
#include "pscal/rng.hpp"

namespace pscal {

double normalize_target(double value, double base, double lower_factor, double upper_factor) {
    return (value / base - lower_factor) / (upper_factor - lower_factor);
}

double denormalize_target(double t, double base, double lower_factor, double upper_factor) {
    return (t * (upper_factor - lower_factor) + lower_factor) * base;
}

ParamAssignment sample_parameters(const ParameterSet& base, const std::vector<std::string>& names,
                                  std::uint64_t seed, std::uint64_t index,
                                  std::uint64_t attempt) {
    if (names.empty()) throw ConfigError("sample_parameters: no parameter names given");
    Rng rng(derive_seed(seed, index, 2 * attempt));
    ParamAssignment out;
    for (const auto& name : names) {
        const auto& e = base.at(name);
        out[name] = rng.uniform(e.lower_factor * e.base, e.upper_factor * e.base);
    }
    return out;
}

Dataset generate_dataset(const ModelConfig& cfg, const Trajectory& event,
                         const std::vector<std::string>& names, std::size_t n,
                         std::uint64_t seed, double noise_std, unsigned workers,
                         const PlaybackOptions& opt, std::string event_id) {
    if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
    if (noise_std < 0.0) throw ConfigError("generate_dataset: negative noise_std");
    const ParameterSet ps = cfg.parameter_set();
    for (const auto& name : names)
        if (!ps.contains(name))
            throw ConfigError("generate_dataset: unknown parameter '" + name + "'");

    const std::size_t m = event.size();
    const std::size_t k = names.size();

    Dataset ds;
    ds.meta.names = names;
    for (const auto& name : names) {
        const auto& e = ps.at(name);
        ds.meta.bases.push_back(e.base);
        ds.meta.lower_factors.push_back(e.lower_factor);
        ds.meta.upper_factors.push_back(e.upper_factor);
    }
    ds.meta.seed = seed;
    ds.meta.noise_std = noise_std;
    ds.meta.event_id = std::move(event_id);
    ds.meta.waveform_len = m;
    ds.n = n;
    ds.inputs.assign(n * 2 * m, 0.0);
    ds.targets.assign(n * k, 0.0);

    std::vector<std::string> failures(n);
    parallel_for(n, workers, [&](std::size_t i) {
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            const ParamAssignment a =
                sample_parameters(ps, names, seed, i, static_cast<std::uint64_t>(attempt));
            Trajectory sim;
            try {
                sim = playback(cfg, a, event, opt);
            } catch (const std::exception& e) {
                failures[i] = e.what();
                continue;
            }
            double* in_row = ds.inputs.data() + i * 2 * m;
            const auto& sp = *sim.p;
            const auto& sq = *sim.q;
            for (std::size_t j = 0; j < m; ++j) {
                in_row[j] = sp[j] - sp[0];
                in_row[m + j] = sq[j] - sq[0];
            }
            if (noise_std > 0.0) {
                Rng noise(derive_seed(seed, i, 2 * static_cast<std::uint64_t>(attempt) + 1));
                for (std::size_t j = 0; j < 2 * m; ++j) in_row[j] += noise_std * noise.normal();
            }
            double* t_row = ds.targets.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) {
                const auto& e = ps.at(names[j]);
                t_row[j] = normalize_target(a.at(names[j]), e.base, e.lower_factor, e.upper_factor);
            }
            failures[i].clear();
            return;
        }
        if (failures[i].empty()) failures[i] = "unknown failure";
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (!failures[i].empty())
            throw SimError("generate_dataset: sample " + std::to_string(i) + " failed after " +
                           std::to_string(kMaxAttempts) + " attempts: " + failures[i]);
    }
    if (!all_finite(ds.inputs) || !all_finite(ds.targets))
        throw SimError("generate_dataset: non-finite values in generated data");
    return ds;
}

Split split_dataset(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed) {
    for (double r : ratios)
        if (!(r > 0.0)) throw ConfigError("split_dataset: ratios must be positive");
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ConfigError("split_dataset: ratios must sum to 1");
    if (ds.n < 3) throw ConfigError("split_dataset: dataset smaller than 3 rows");

    std::vector<std::size_t> idx(ds.n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);

    const auto n = static_cast<double>(ds.n);
    auto n_train = static_cast<std::size_t>(std::llround(n * ratios[0]));
    auto n_val = static_cast<std::size_t>(std::llround(n * ratios[1]));
    n_train = std::max<std::size_t>(1, std::min(n_train, ds.n - 2));
    n_val = std::max<std::size_t>(1, std::min(n_val, ds.n - n_train - 1));

    Split s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    s.test.assign(idx.begin() + n_train + n_val, idx.end());
    return s;
}

void normalize_inputs(Dataset& ds) {
    if (ds.n == 0) throw ConfigError("normalize_inputs: empty dataset");
    if (!ds.split) throw ConfigError("normalize_inputs: dataset has no split");
    if (ds.meta.normalized) throw ConfigError("normalize_inputs: already normalized");

    const std::size_t m = ds.meta.waveform_len;
    for (int c = 0; c < 2; ++c) {
        double mean = 0.0;
        std::size_t count = 0;
        for (std::size_t i : ds.split->train) {
            const double* row = ds.input_row(i) + c * m;
            for (std::size_t j = 0; j < m; ++j) mean += row[j];
            count += m;
        }
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (std::size_t i : ds.split->train) {
            const double* row = ds.input_row(i) + c * m;
            for (std::size_t j = 0; j < m; ++j) {
                const double d = row[j] - mean;
                var += d * d;
            }
        }
        var /= static_cast<double>(count);
        double std_dev = std::sqrt(var);
        if (std_dev < 1e-12) {
            ds.meta.constant_channels.push_back(c);
            std_dev = 1.0;
        }
        ds.meta.input_mean[c] = mean;
        ds.meta.input_std[c] = std_dev;
    }
    for (std::size_t i = 0; i < ds.n; ++i) {
        double* row = ds.inputs.data() + i * 2 * m;
        for (int c = 0; c < 2; ++c)
            for (std::size_t j = 0; j < m; ++j)
                row[c * m + j] = (row[c * m + j] - ds.meta.input_mean[c]) / ds.meta.input_std[c];
    }
    ds.meta.normalized = true;
}

void apply_input_stats(const DatasetMeta& meta, std::vector<double>& waveform) {
    if (!meta.normalized) throw ConfigError("apply_input_stats: normalization stats missing");
    const std::size_t m = meta.waveform_len;
    if (waveform.size() != 2 * m)
        throw ConfigError("apply_input_stats: waveform length mismatch");
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t j = 0; j < m; ++j)
            waveform[c * m + j] = (waveform[c * m + j] - meta.input_mean[c]) / meta.input_std[c];
}

void invert_input_stats(const DatasetMeta& meta, std::vector<double>& waveform) {
    if (!meta.normalized) throw ConfigError("invert_input_stats: normalization stats missing");
    const std::size_t m = meta.waveform_len;
    if (waveform.size() != 2 * m)
        throw ConfigError("invert_input_stats: waveform length mismatch");
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t j = 0; j < m; ++j)
            waveform[c * m + j] = waveform[c * m + j] * meta.input_std[c] + meta.input_mean[c];
}

nlohmann::json to_json(const DatasetMeta& meta) {
    nlohmann::json j;
    j["names"] = meta.names;
    j["bases"] = meta.bases;
    j["lower_factors"] = meta.lower_factors;
    j["upper_factors"] = meta.upper_factors;
    j["seed"] = meta.seed;
    j["noise_std"] = meta.noise_std;
    j["event_id"] = meta.event_id;
    j["waveform_len"] = meta.waveform_len;
    j["normalized"] = meta.normalized;
    j["input_mean"] = meta.input_mean;
    j["input_std"] = meta.input_std;
    j["constant_channels"] = meta.constant_channels;
    return j;
}

DatasetMeta dataset_meta_from_json(const nlohmann::json& j) {
    DatasetMeta meta;
    meta.names = j.at("names").get<std::vector<std::string>>();
    meta.bases = j.at("bases").get<std::vector<double>>();
    meta.lower_factors = j.at("lower_factors").get<std::vector<double>>();
    meta.upper_factors = j.at("upper_factors").get<std::vector<double>>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.noise_std = j.at("noise_std").get<double>();
    meta.event_id = j.at("event_id").get<std::string>();
    meta.waveform_len = j.at("waveform_len").get<std::size_t>();
    meta.normalized = j.at("normalized").get<bool>();
    auto mean = j.at("input_mean").get<std::vector<double>>();
    auto stdd = j.at("input_std").get<std::vector<double>>();
    if (mean.size() != 2 || stdd.size() != 2)
        throw ConfigError("dataset meta: malformed input statistics");
    meta.input_mean = {mean[0], mean[1]};
    meta.input_std = {stdd[0], stdd[1]};
    meta.constant_channels = j.at("constant_channels").get<std::vector<int>>();
    return meta;
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const std::vector<double>& data,
                      std::size_t rows, std::size_t cols) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("dataset: cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = data.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            if (j) out << ',';
            out << fmt_double(row[j]);
        }
        out << '\n';
    }
    if (!out) throw ConfigError("dataset: write failed for '" + path.string() + "'");
}

std::vector<double> read_matrix_csv(const std::filesystem::path& path, std::size_t rows,
                                    std::size_t cols) {
    std::ifstream in(path);
    if (!in) throw ConfigError("dataset: cannot open '" + path.string() + "'");
    std::vector<double> data;
    data.reserve(rows * cols);
    std::string line;
    std::size_t r = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++r;
        std::size_t pos = 0, c = 0;
        while (pos <= line.size()) {
            std::size_t next = line.find(',', pos);
            if (next == std::string::npos) next = line.size();
            double v = 0.0;
            auto res = std::from_chars(line.data() + pos, line.data() + next, v);
            if (res.ec != std::errc())
                throw ConfigError("dataset: bad number in '" + path.string() + "' row " +
                                  std::to_string(r));
            data.push_back(v);
            ++c;
            pos = next + 1;
            if (next == line.size()) break;
        }
        if (c != cols)
            throw ConfigError("dataset: row " + std::to_string(r) + " of '" + path.string() +
                              "' has " + std::to_string(c) + " columns, expected " +
                              std::to_string(cols));
    }
    if (r != rows)
        throw ConfigError("dataset: '" + path.string() + "' has " + std::to_string(r) +
                          " rows, expected " + std::to_string(rows));
    return data;
}

} // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        nlohmann::json j = to_json(ds.meta);
        j["n"] = ds.n;
        if (ds.split) {
            j["split"] = {{"train", ds.split->train}, {"val", ds.split->val},
                          {"test", ds.split->test}};
        }
        std::ofstream out(dir / "meta.json", std::ios::binary);
        if (!out) throw ConfigError("dataset: cannot write meta.json in '" + dir.string() + "'");
        out << j.dump(2) << '\n';
    }
    write_matrix_csv(dir / "inputs.csv", ds.inputs, ds.n, ds.input_width());
    write_matrix_csv(dir / "targets.csv", ds.targets, ds.n, ds.k());
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw ConfigError("dataset: cannot open '" + (dir / "meta.json").string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("dataset: meta.json parse error: " + std::string(e.what()));
    }
    Dataset ds;
    ds.meta = dataset_meta_from_json(j);
    ds.n = j.at("n").get<std::size_t>();
    if (j.contains("split")) {
        Split s;
        s.train = j["split"].at("train").get<std::vector<std::size_t>>();
        s.val = j["split"].at("val").get<std::vector<std::size_t>>();
        s.test = j["split"].at("test").get<std::vector<std::size_t>>();
        ds.split = std::move(s);
    }
    ds.inputs = read_matrix_csv(dir / "inputs.csv", ds.n, ds.input_width());
    ds.targets = read_matrix_csv(dir / "targets.csv", ds.n, ds.k());
    return ds;
}

} // namespace pscal
