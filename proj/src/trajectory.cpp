#include "pscal/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "pscal/common.hpp"

namespace pscal {

std::vector<double> unwrap_angles(std::vector<double> a) {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (std::size_t k = 1; k < a.size(); ++k) {
        const double d = a[k] - a[k - 1];
        a[k] = a[k - 1] + std::remainder(d, kTwoPi);
    }
    return a;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim spaces and a trailing carriage return
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, std::size_t row, const std::string& col,
                    const std::filesystem::path& path) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("pmu csv '" + path.string() + "': bad number '" + s + "' in column " +
                          col + " at row " + std::to_string(row));
    if (std::isnan(v))
        throw ConfigError("pmu csv '" + path.string() + "': NaN sample in column " + col +
                          " at row " + std::to_string(row));
    if (!std::isfinite(v))
        throw ConfigError("pmu csv '" + path.string() + "': non-finite sample in column " + col +
                          " at row " + std::to_string(row));
    return v;
}

} // namespace

Trajectory load_pmu_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("pmu csv: cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("pmu csv '" + path.string() + "': empty file");
    const auto header = split_csv_line(line);
    bool has_pq = false;
    if (header == std::vector<std::string>{"t", "vmag", "vang"}) {
        has_pq = false;
    } else if (header == std::vector<std::string>{"t", "vmag", "vang", "p", "q"}) {
        has_pq = true;
    } else {
        throw ConfigError("pmu csv '" + path.string() +
                          "': header must be 't,vmag,vang' or 't,vmag,vang,p,q'");
    }

    std::vector<double> t, vmag, vang, p, q;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw ConfigError("pmu csv '" + path.string() + "': row " + std::to_string(row) +
                              " has " + std::to_string(f.size()) + " fields, expected " +
                              std::to_string(header.size()));
        t.push_back(parse_number(f[0], row, "t", path));
        vmag.push_back(parse_number(f[1], row, "vmag", path));
        vang.push_back(parse_number(f[2], row, "vang", path));
        if (has_pq) {
            p.push_back(parse_number(f[3], row, "p", path));
            q.push_back(parse_number(f[4], row, "q", path));
        }
    }
    const std::size_t m = t.size();
    if (m < 2) throw ConfigError("pmu csv '" + path.string() + "': need at least 2 samples");

    for (std::size_t k = 0; k < m; ++k) {
        if (!(vmag[k] > 0.0))
            throw ConfigError("pmu csv '" + path.string() + "': nonpositive vmag at row " +
                              std::to_string(k + 2));
    }

    std::vector<double> dts(m - 1);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        dts[k] = t[k + 1] - t[k];
        if (!(dts[k] > 0.0))
            throw ConfigError("pmu csv '" + path.string() + "': non-monotonic time at row " +
                              std::to_string(k + 3));
    }
    std::vector<double> sorted = dts;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (std::size_t k = 0; k < dts.size(); ++k) {
        if (std::fabs(dts[k] - median) > 0.01 * median)
            throw ConfigError("pmu csv '" + path.string() + "': non-uniform sampling between rows " +
                              std::to_string(k + 2) + " and " + std::to_string(k + 3));
    }

    Trajectory traj;
    traj.t0 = t[0];
    traj.dt_sample = median;
    traj.vmag = std::move(vmag);
    traj.vang = unwrap_angles(std::move(vang));
    if (has_pq) {
        traj.p = std::move(p);
        traj.q = std::move(q);
    }
    return traj;
}

void save_pmu_csv(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("pmu csv: cannot write '" + path.string() + "'");
    const bool has_pq = traj.p.has_value() && traj.q.has_value();
    out << (has_pq ? "t,vmag,vang,p,q\n" : "t,vmag,vang\n");
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << fmt_double(traj.time_at(k)) << ',' << fmt_double(traj.vmag[k]) << ','
            << fmt_double(traj.vang[k]);
        if (has_pq) out << ',' << fmt_double((*traj.p)[k]) << ',' << fmt_double((*traj.q)[k]);
        out << '\n';
    }
    if (!out) throw ConfigError("pmu csv: write failed for '" + path.string() + "'");
}

} // namespace pscal
