#include "pscal/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "pscal/common.hpp"

namespace pscal {

namespace {
void require_positive(double t, const char* what) {
    if (!(t > 0.0) || !std::isfinite(t))
        throw ConfigError(std::string(what) + " must be strictly positive");
}
} // namespace

Block Block::gain(double k) {
    Block b;
    b.kind_ = BlockKind::Gain;
    b.k_ = k;
    return b;
}

Block Block::lag(double k, double t, double lo, double hi, double epsilon) {
    require_positive(t, "lag time constant");
    Block b;
    b.kind_ = BlockKind::Lag;
    b.k_ = k;
    b.t2_ = t;
    b.lo_ = lo;
    b.hi_ = hi;
    b.has_state_ = t >= epsilon; // below epsilon: algebraic gain
    return b;
}

Block Block::lead_lag(double t1, double t2, double epsilon) {
    require_positive(t2, "lead-lag denominator time constant");
    if (!(t1 >= 0.0) || !std::isfinite(t1))
        throw ConfigError("lead-lag numerator time constant must be non-negative");
    if (t2 < epsilon)
        throw ConfigError("lead-lag denominator time constant below epsilon");
    Block b;
    b.kind_ = BlockKind::LeadLag;
    b.t1_ = t1;
    b.t2_ = t2;
    b.has_state_ = true;
    return b;
}

Block Block::washout(double t, double epsilon) {
    require_positive(t, "washout time constant");
    if (t < epsilon) throw ConfigError("washout time constant below epsilon");
    Block b;
    b.kind_ = BlockKind::Washout;
    b.t2_ = t;
    b.has_state_ = true;
    return b;
}

Block Block::limited_integrator(double k, double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("integrator limits must satisfy lo < hi");
    Block b;
    b.kind_ = BlockKind::LimitedIntegrator;
    b.k_ = k;
    b.lo_ = lo;
    b.hi_ = hi;
    b.has_state_ = true;
    return b;
}

Block Block::saturation(double a, double b_coeff) {
    Block b;
    b.kind_ = BlockKind::Saturation;
    b.t1_ = a;
    b.t2_ = b_coeff;
    return b;
}

double Block::output(double x, double u) const {
    switch (kind_) {
        case BlockKind::Gain:
            return k_ * u;
        case BlockKind::Lag:
            if (!has_state_) return std::clamp(k_ * u, lo_, hi_);
            return std::clamp(x, lo_, hi_);
        case BlockKind::LeadLag:
            return (t1_ / t2_) * u + x;
        case BlockKind::Washout:
            return u - x;
        case BlockKind::LimitedIntegrator:
            return std::clamp(x, lo_, hi_);
        case BlockKind::Saturation: {
            double e = u - t1_;
            return e > 0.0 ? t2_ * e * e : 0.0;
        }
    }
    return 0.0;
}

double Block::dxdt(double x, double u) const {
    switch (kind_) {
        case BlockKind::Gain:
        case BlockKind::Saturation:
            return 0.0;
        case BlockKind::Lag: {
            if (!has_state_) return 0.0;
            double d = (k_ * u - x) / t2_;
            if (x >= hi_ && d > 0.0) return 0.0;
            if (x <= lo_ && d < 0.0) return 0.0;
            return d;
        }
        case BlockKind::LeadLag:
            return ((1.0 - t1_ / t2_) * u - x) / t2_;
        case BlockKind::Washout:
            return (u - x) / t2_;
        case BlockKind::LimitedIntegrator: {
            double d = k_ * u;
            if (x >= hi_ && d > 0.0) return 0.0;
            if (x <= lo_ && d < 0.0) return 0.0;
            return d;
        }
    }
    return 0.0;
}

double Block::init_state(double u) const {
    switch (kind_) {
        case BlockKind::Gain:
        case BlockKind::Saturation:
            return 0.0;
        case BlockKind::Lag:
            return has_state_ ? std::clamp(k_ * u, lo_, hi_) : 0.0;
        case BlockKind::LeadLag:
            return (1.0 - t1_ / t2_) * u;
        case BlockKind::Washout:
            return u;
        case BlockKind::LimitedIntegrator:
            return 0.0;
    }
    return 0.0;
}

double Block::clamp_state(double x) const {
    if (kind_ == BlockKind::Lag || kind_ == BlockKind::LimitedIntegrator)
        return std::clamp(x, lo_, hi_);
    return x;
}

} // namespace pscal
