#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pscal {

/// Minimal dependency-free SVG line plot (fixed canvas, auto-scaled axes,
/// legend). Output is deterministic for identical inputs.
class LinePlot {
public:
    LinePlot(std::string title, std::string xlabel, std::string ylabel)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

    void add_series(std::string name, std::vector<double> x, std::vector<double> y);
    void write(const std::filesystem::path& path) const;

private:
    struct Series {
        std::string name;
        std::vector<double> x, y;
    };
    std::string title_, xlabel_, ylabel_;
    std::vector<Series> series_;
};

} // namespace pscal
