#pragma once

#include <cstddef>
#include <vector>

namespace pscal::nn {

/// Multi-channel 1-D signal, row-major [channel][position].
struct Signal {
    int channels = 0;
    int length = 0;
    std::vector<double> v;

    Signal() = default;
    Signal(int c, int l) : channels(c), length(l), v(static_cast<std::size_t>(c) * l, 0.0) {}

    void resize(int c, int l) {
        channels = c;
        length = l;
        v.assign(static_cast<std::size_t>(c) * l, 0.0);
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    int size() const { return channels * length; }
    double* row(int c) { return v.data() + static_cast<std::size_t>(c) * length; }
    const double* row(int c) const { return v.data() + static_cast<std::size_t>(c) * length; }
    double& at(int c, int i) { return v[static_cast<std::size_t>(c) * length + i]; }
    double at(int c, int i) const { return v[static_cast<std::size_t>(c) * length + i]; }
};

} // namespace pscal::nn
