#include "pscal/unit_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <set>

namespace pscal {

namespace {

/// Strict section parser: every key must be consumed, unknown keys rejected.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object())
            throw ConfigError("model config: section '" + name_ + "' must be an object");
    }

    double num(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end())
            throw ConfigError("model config: missing parameter '" + name_ + "." + key + "'");
        return take_number(it, key);
    }

    double num_or(const char* key, double fallback) {
        auto it = j_.find(key);
        if (it == j_.end()) return fallback;
        return take_number(it, key);
    }

    bool flag(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end())
            throw ConfigError("model config: missing parameter '" + name_ + "." + key + "'");
        if (!it->is_boolean())
            throw ConfigError("model config: '" + name_ + "." + key + "' must be a boolean");
        seen_.insert(key);
        return it->get<bool>();
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key()))
                throw ConfigError("model config: unknown field '" + name_ + "." + item.key() + "'");
        }
    }

private:
    double take_number(nlohmann::json::const_iterator it, const char* key) {
        if (!it->is_number())
            throw ConfigError("model config: '" + name_ + "." + key + "' must be a number");
        seen_.insert(key);
        double v = it->get<double>();
        if (!std::isfinite(v))
            throw ConfigError("model config: '" + name_ + "." + key + "' is not finite");
        return v;
    }

    const nlohmann::json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

double* field_ptr(ModelConfig& c, const std::string& name) {
    auto& m = c.machine;
    auto& e = c.exciter;
    auto& g = c.governor;
    auto& s = c.stabilizer;
    if (name == "machine.h") return &m.h;
    if (name == "machine.d") return &m.d;
    if (name == "machine.xd") return &m.xd;
    if (name == "machine.xq") return &m.xq;
    if (name == "machine.xdp") return &m.xdp;
    if (name == "machine.xqp") return &m.xqp;
    if (name == "machine.xdpp") return &m.xdpp;
    if (name == "machine.xl") return &m.xl;
    if (name == "machine.td0p") return &m.td0p;
    if (name == "machine.tq0p") return &m.tq0p;
    if (name == "machine.td0pp") return &m.td0pp;
    if (name == "machine.tq0pp") return &m.tq0pp;
    if (name == "exciter.ka") return &e.ka;
    if (name == "exciter.ta") return &e.ta;
    if (name == "exciter.tb") return &e.tb;
    if (name == "exciter.tc") return &e.tc;
    if (name == "governor.ks") return &g.ks;
    if (name == "governor.r") return &g.r;
    if (name == "governor.tg") return &g.tg;
    if (name == "stabilizer.kpss") return &s.kpss;
    if (name == "stabilizer.tw") return &s.tw;
    if (name == "stabilizer.t1") return &s.t1;
    if (name == "stabilizer.t2") return &s.t2;
    if (name == "stabilizer.t3") return &s.t3;
    if (name == "stabilizer.t4") return &s.t4;
    return nullptr;
}

} // namespace

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config: document must be an object");
    static const std::set<std::string> kSections = {"machine", "exciter", "governor",
                                                    "stabilizer", "operating_point"};
    for (const auto& item : j.items()) {
        if (!kSections.count(item.key()))
            throw ConfigError("model config: unknown section '" + item.key() + "'");
    }
    for (const char* required : {"machine", "exciter", "governor", "stabilizer"}) {
        if (!j.contains(required))
            throw ConfigError("model config: missing section '" + std::string(required) + "'");
    }

    ModelConfig c;
    {
        Section s(j.at("machine"), "machine");
        auto& m = c.machine;
        m.h = s.num("h");
        m.d = s.num_or("d", 0.0);
        m.xd = s.num("xd");
        m.xq = s.num("xq");
        m.xdp = s.num("xdp");
        m.xqp = s.num("xqp");
        m.xdpp = s.num("xdpp");
        m.xl = s.num("xl");
        m.td0p = s.num("td0p");
        m.tq0p = s.num("tq0p");
        m.td0pp = s.num("td0pp");
        m.tq0pp = s.num("tq0pp");
        m.sat_a = s.num_or("sat_a", 0.0);
        m.sat_b = s.num_or("sat_b", 0.0);
        s.finish();
    }
    {
        Section s(j.at("exciter"), "exciter");
        auto& e = c.exciter;
        e.ka = s.num("ka");
        e.ta = s.num("ta");
        e.tb = s.num("tb");
        e.tc = s.num("tc");
        e.efd_min = s.num_or("efd_min", -6.0);
        e.efd_max = s.num_or("efd_max", 6.0);
        s.finish();
    }
    {
        Section s(j.at("governor"), "governor");
        auto& g = c.governor;
        g.ks = s.num("ks");
        g.r = s.num("r");
        g.tg = s.num("tg");
        g.pm_min = s.num_or("pm_min", 0.0);
        g.pm_max = s.num_or("pm_max", 1.5);
        s.finish();
    }
    {
        Section s(j.at("stabilizer"), "stabilizer");
        auto& p = c.stabilizer;
        p.enabled = s.flag("enabled");
        if (p.enabled) {
            p.kpss = s.num("kpss");
            p.tw = s.num("tw");
            p.t1 = s.num("t1");
            p.t2 = s.num("t2");
            p.t3 = s.num("t3");
            p.t4 = s.num("t4");
        } else {
            StabilizerParams defaults;
            p.kpss = s.num_or("kpss", defaults.kpss);
            p.tw = s.num_or("tw", defaults.tw);
            p.t1 = s.num_or("t1", defaults.t1);
            p.t2 = s.num_or("t2", defaults.t2);
            p.t3 = s.num_or("t3", defaults.t3);
            p.t4 = s.num_or("t4", defaults.t4);
        }
        p.vs_max = s.num_or("vs_max", 0.10);
        s.finish();
    }
    if (j.contains("operating_point")) {
        Section s(j.at("operating_point"), "operating_point");
        c.op.p = s.num("p");
        c.op.q = s.num("q");
        s.finish();
    }
    return c;
}

ModelConfig ModelConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("model config: cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model config: parse error in '" + path.string() + "': " + e.what());
    }
    return from_json(j);
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["machine"] = {{"h", machine.h},       {"d", machine.d},
                    {"xd", machine.xd},     {"xq", machine.xq},
                    {"xdp", machine.xdp},   {"xqp", machine.xqp},
                    {"xdpp", machine.xdpp}, {"xl", machine.xl},
                    {"td0p", machine.td0p}, {"tq0p", machine.tq0p},
                    {"td0pp", machine.td0pp}, {"tq0pp", machine.tq0pp},
                    {"sat_a", machine.sat_a}, {"sat_b", machine.sat_b}};
    j["exciter"] = {{"ka", exciter.ka},   {"ta", exciter.ta},
                    {"tb", exciter.tb},   {"tc", exciter.tc},
                    {"efd_min", exciter.efd_min}, {"efd_max", exciter.efd_max}};
    j["governor"] = {{"ks", governor.ks}, {"r", governor.r}, {"tg", governor.tg},
                     {"pm_min", governor.pm_min}, {"pm_max", governor.pm_max}};
    j["stabilizer"] = {{"enabled", stabilizer.enabled}, {"kpss", stabilizer.kpss},
                       {"tw", stabilizer.tw},           {"t1", stabilizer.t1},
                       {"t2", stabilizer.t2},           {"t3", stabilizer.t3},
                       {"t4", stabilizer.t4},           {"vs_max", stabilizer.vs_max}};
    j["operating_point"] = {{"p", op.p}, {"q", op.q}};
    return j;
}

ParameterSet ModelConfig::parameter_set() const {
    ParameterSet ps;
    auto pu = [&](const char* name, double v) { ps.add({name, v, 0.5, 2.0, "pu"}); };
    auto sec = [&](const char* name, double v) { ps.add({name, v, 0.5, 2.0, "s"}); };
    sec("machine.h", machine.h);
    pu("machine.d", machine.d);
    pu("machine.xd", machine.xd);
    pu("machine.xq", machine.xq);
    pu("machine.xdp", machine.xdp);
    pu("machine.xqp", machine.xqp);
    pu("machine.xdpp", machine.xdpp);
    pu("machine.xl", machine.xl);
    sec("machine.td0p", machine.td0p);
    sec("machine.tq0p", machine.tq0p);
    sec("machine.td0pp", machine.td0pp);
    sec("machine.tq0pp", machine.tq0pp);
    pu("exciter.ka", exciter.ka);
    sec("exciter.ta", exciter.ta);
    sec("exciter.tb", exciter.tb);
    sec("exciter.tc", exciter.tc);
    pu("governor.ks", governor.ks);
    pu("governor.r", governor.r);
    sec("governor.tg", governor.tg);
    pu("stabilizer.kpss", stabilizer.kpss);
    sec("stabilizer.tw", stabilizer.tw);
    sec("stabilizer.t1", stabilizer.t1);
    sec("stabilizer.t2", stabilizer.t2);
    sec("stabilizer.t3", stabilizer.t3);
    sec("stabilizer.t4", stabilizer.t4);
    return ps;
}

void ModelConfig::apply(const std::string& name, double value) {
    double* p = field_ptr(*this, name);
    if (!p) throw ConfigError("model config: unknown parameter '" + name + "'");
    if (!std::isfinite(value))
        throw ConfigError("model config: non-finite override for '" + name + "'");
    *p = value;
}

void ModelConfig::apply(const ParamAssignment& assignment) {
    for (const auto& [name, value] : assignment) apply(name, value);
}

double ModelConfig::value_of(const std::string& name) const {
    double* p = field_ptr(const_cast<ModelConfig&>(*this), name);
    if (!p) throw ConfigError("model config: unknown parameter '" + name + "'");
    return *p;
}

UnitModel::UnitModel(const ModelConfig& cfg) : cfg_(cfg) {
    const auto& m = cfg_.machine;
    if (!(m.h > 0.0)) throw ConfigError("unit model: nonpositive inertia");
    if (m.d < 0.0) throw ConfigError("unit model: negative damping");
    if (!(m.xl >= 0.0 && m.xl < m.xdpp && m.xdpp <= m.xdp && m.xdp <= m.xd))
        throw ConfigError("unit model: reactance ordering violated (require xl < xdpp <= xdp <= xd)");
    if (!(m.xdpp <= m.xqp && m.xqp <= m.xq))
        throw ConfigError("unit model: reactance ordering violated (require xdpp <= xqp <= xq)");
    for (auto [t, what] : {std::pair{m.td0p, "td0p"}, {m.tq0p, "tq0p"},
                           {m.td0pp, "td0pp"}, {m.tq0pp, "tq0pp"}}) {
        if (!(t > 0.0)) throw ConfigError(std::string("unit model: nonpositive time constant ") + what);
    }
    if (m.sat_b < 0.0) throw ConfigError("unit model: negative saturation coefficient");

    const auto& e = cfg_.exciter;
    if (!(e.ka > 0.0)) throw ConfigError("unit model: nonpositive exciter gain");
    if (!(e.efd_min < e.efd_max)) throw ConfigError("unit model: exciter limits inverted");
    const auto& g = cfg_.governor;
    if (g.ks < 0.0 || g.r < 0.0) throw ConfigError("unit model: negative governor gain or droop");
    if (!(g.pm_min < g.pm_max)) throw ConfigError("unit model: governor limits inverted");

    gd1_ = (m.xdpp - m.xl) / (m.xdp - m.xl);
    gd2_ = (m.xdp - m.xdpp) / ((m.xdp - m.xl) * (m.xdp - m.xl));
    gq1_ = (m.xdpp - m.xl) / (m.xqp - m.xl);
    gq2_ = (m.xqp - m.xdpp) / ((m.xqp - m.xl) * (m.xqp - m.xl));

    exc_ll_ = Block::lead_lag(e.tc, e.tb);
    exc_lag_ = Block::lag(e.ka, e.ta, e.efd_min, e.efd_max);
    gov_lag_ = Block::lag(1.0, g.tg, g.pm_min, g.pm_max);

    const auto& p = cfg_.stabilizer;
    if (p.enabled) {
        if (p.kpss < 0.0) throw ConfigError("unit model: negative stabilizer gain");
        if (!(p.vs_max > 0.0)) throw ConfigError("unit model: nonpositive stabilizer limit");
        pss_wash_ = Block::washout(p.tw);
        pss_ll1_ = Block::lead_lag(p.t1, p.t2);
        pss_ll2_ = Block::lead_lag(p.t3, p.t4);
    }
    nx_ = p.enabled ? 12 : 9;
}

UnitModel build_unit(const ModelConfig& cfg) { return UnitModel(cfg); }

UnitModel::Dq UnitModel::stator(double delta, double eqp, double psi1d, double edp,
                                double psi1q, double vmag, double vang) const {
    Dq r;
    const double xdpp = cfg_.machine.xdpp;
    r.vd = vmag * std::sin(delta - vang);
    r.vq = vmag * std::cos(delta - vang);
    r.psi_dpp = gd1_ * eqp + (1.0 - gd1_) * psi1d;
    r.psi_qpp = gq1_ * edp + (1.0 - gq1_) * psi1q;
    r.id = (r.psi_dpp - r.vq) / xdpp;
    r.iq = (r.vd + r.psi_qpp) / xdpp;
    r.te = r.psi_dpp * r.iq - r.psi_qpp * r.id;
    return r;
}

void UnitModel::deriv_raw(const double* x, double vmag, double vang, double vref,
                          double pm_set, double* dx) const {
    const auto& m = cfg_.machine;
    const auto& g = cfg_.governor;
    const auto& p = cfg_.stabilizer;

    const double omega = x[kOmega];
    const Dq st = stator(x[kDelta], x[kEqp], x[kPsi1d], x[kEdp], x[kPsi1q], vmag, vang);

    // stabilizer -> exciter summing junction
    double vs = 0.0;
    if (p.enabled) {
        const double yw = pss_wash_.output(x[kPssW], omega);
        const double u1 = p.kpss * yw;
        const double y1 = pss_ll1_.output(x[kPssL1], u1);
        const double y2 = pss_ll2_.output(x[kPssL2], y1);
        vs = std::clamp(y2, -p.vs_max, p.vs_max);
        dx[kPssW] = pss_wash_.dxdt(x[kPssW], omega);
        dx[kPssL1] = pss_ll1_.dxdt(x[kPssL1], u1);
        dx[kPssL2] = pss_ll2_.dxdt(x[kPssL2], y1);
    }

    // exciter
    const double verr = vref - vmag + vs;
    const double yll = exc_ll_.output(x[kExcLl], verr);
    dx[kExcLl] = exc_ll_.dxdt(x[kExcLl], verr);
    const double efd = exc_lag_.output(x[kEfd], yll);
    dx[kEfd] = exc_lag_.dxdt(x[kEfd], yll);

    // flux dynamics; quadratic saturation on the subtransient flux magnitude
    double se = 0.0;
    if (m.sat_b > 0.0) {
        const double psi_mag = std::hypot(st.psi_dpp, st.psi_qpp);
        const double e = psi_mag - m.sat_a;
        if (e > 0.0) se = m.sat_b * e * e;
    }
    const double xad_ifd = x[kEqp] + (m.xd - m.xdp) * (gd1_ * st.id + gd2_ * (x[kEqp] - x[kPsi1d])) +
                           se * st.psi_dpp;
    const double xaq_ifq = x[kEdp] + (m.xq - m.xqp) * (gq1_ * st.iq + gq2_ * (x[kEdp] - x[kPsi1q])) +
                           se * st.psi_qpp * (m.xq - m.xl) / (m.xd - m.xl);
    dx[kEqp] = (efd - xad_ifd) / m.td0p;
    dx[kPsi1d] = (x[kEqp] - x[kPsi1d] - (m.xdp - m.xl) * st.id) / m.td0pp;
    dx[kEdp] = -xaq_ifq / m.tq0p;
    dx[kPsi1q] = (x[kEdp] - x[kPsi1q] - (m.xqp - m.xl) * st.iq) / m.tq0pp;

    // governor (droop fed back from the actuator output)
    const double pm = gov_lag_.output(x[kPm], 0.0);
    const double ugov = pm_set + g.ks * (-omega - g.r * (pm - pm_set));
    dx[kPm] = gov_lag_.dxdt(x[kPm], ugov);

    // rotor
    const double tm = pm / (1.0 + omega);
    dx[kDelta] = kOmegaBase * omega;
    dx[kOmega] = (tm - st.te - m.d * omega) / (2.0 * m.h);
}

void UnitModel::derivatives(const SimState& s, std::vector<double>& dx) const {
    if (s.x.size() != nx_)
        throw SimError("derivatives: state length mismatch");
    if (!all_finite(s.x) || !std::isfinite(s.vmag) || !std::isfinite(s.vang) ||
        !std::isfinite(s.vref) || !std::isfinite(s.pm_set))
        throw SimError("derivatives: non-finite state or input");
    dx.assign(nx_, 0.0);
    deriv_raw(s.x.data(), s.vmag, s.vang, s.vref, s.pm_set, dx.data());
}

std::vector<double> UnitModel::derivatives(const SimState& s) const {
    std::vector<double> dx;
    derivatives(s, dx);
    return dx;
}

void UnitModel::clamp_states(double* x) const {
    x[kEfd] = exc_lag_.clamp_state(x[kEfd]);
    x[kPm] = gov_lag_.clamp_state(x[kPm]);
}

void UnitModel::step_rk4(SimState& s, double dt) const {
    const double vmag = s.vmag, vang = s.vang;
    step_rk4(s, dt, [vmag, vang](double) { return std::pair{vmag, vang}; });
}

std::pair<double, double> UnitModel::output(const SimState& s) const {
    if (s.x.size() != nx_) throw SimError("output: state length mismatch");
    if (!all_finite(s.x) || !std::isfinite(s.vmag) || !std::isfinite(s.vang))
        throw SimError("output: non-finite state");
    const Dq st = stator(s.x[kDelta], s.x[kEqp], s.x[kPsi1d], s.x[kEdp], s.x[kPsi1q],
                         s.vmag, s.vang);
    const double p = st.vd * st.id + st.vq * st.iq;
    const double q = st.vq * st.id - st.vd * st.iq;
    return {p, q};
}

namespace {

/// Dense Gaussian elimination with partial pivoting; a is n x n row-major,
/// b the right-hand side (overwritten with the solution). Returns false on a
/// numerically singular pivot.
bool solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::fabs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double v = std::fabs(a[r * n + col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best < 1e-14) return false;
        if (piv != col) {
            for (std::size_t c = col; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        const double d = a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / d;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * b[c];
        b[r] = s / a[r * n + r];
    }
    return true;
}

} // namespace

SimState UnitModel::init_equilibrium(double vmag, double vang, double p, double q) const {
    if (!(vmag > 0.0))
        throw SimError("init_equilibrium: terminal voltage must be positive");
    if (!std::isfinite(vang) || !std::isfinite(p) || !std::isfinite(q))
        throw SimError("init_equilibrium: non-finite terminal condition");

    const auto& m = cfg_.machine;
    const auto& e = cfg_.exciter;

    // Analytic phasor seed (exact for the unsaturated lossless model).
    const std::complex<double> vt = std::polar(vmag, vang);
    const std::complex<double> it = std::conj(std::complex<double>(p, q) / vt);
    const std::complex<double> eq_ph = vt + std::complex<double>(0.0, m.xq) * it;
    const double delta = std::arg(eq_ph);
    const std::complex<double> rot = std::polar(1.0, -(delta - 1.5707963267948966));
    const std::complex<double> idq = it * rot;
    const double id = idq.real(), iq = idq.imag();
    const double vd = vmag * std::sin(delta - vang);
    const double vq = vmag * std::cos(delta - vang);

    SimState s;
    s.x.assign(nx_, 0.0);
    s.t = 0.0;
    s.vmag = vmag;
    s.vang = vang;
    s.x[kDelta] = delta;
    s.x[kOmega] = 0.0;
    s.x[kEqp] = vq + m.xdp * id;
    s.x[kPsi1d] = s.x[kEqp] - (m.xdp - m.xl) * id;
    s.x[kEdp] = -(m.xq - m.xqp) * iq;
    s.x[kPsi1q] = s.x[kEdp] - (m.xqp - m.xl) * iq;

    const double efd = s.x[kEqp] + (m.xd - m.xdp) * id;
    if (!(efd > e.efd_min && efd < e.efd_max))
        throw SimError("init_equilibrium: equilibrium field voltage outside exciter limits");
    const double te = vd * id + vq * iq;
    if (!(te >= cfg_.governor.pm_min && te <= cfg_.governor.pm_max))
        throw SimError("init_equilibrium: equilibrium mechanical power outside governor limits");

    s.vref = vmag + efd / e.ka;
    s.x[kExcLl] = exc_ll_.init_state(efd / e.ka);
    s.x[kEfd] = efd;
    s.pm_set = te;
    s.x[kPm] = te;
    if (cfg_.stabilizer.enabled) {
        s.x[kPssW] = pss_wash_.init_state(0.0);
        s.x[kPssL1] = pss_ll1_.init_state(0.0);
        s.x[kPssL2] = pss_ll2_.init_state(0.0);
    }

    // Damped Newton on [derivatives; P - p; Q - q] over [x; vref; pm_set].
    const std::size_t n = nx_ + 2;
    auto residual = [&](const SimState& st, std::vector<double>& r) {
        r.assign(n, 0.0);
        deriv_raw(st.x.data(), st.vmag, st.vang, st.vref, st.pm_set, r.data());
        auto [pp, qq] = output(st);
        r[nx_] = pp - p;
        r[nx_ + 1] = qq - q;
    };
    auto norm_inf = [](const std::vector<double>& v) {
        double mx = 0.0;
        for (double x : v) mx = std::max(mx, std::fabs(x));
        return mx;
    };

    const double tol = 1e-10;
    const int max_iter = 50;
    std::vector<double> r, r_trial, jac(n * n), rhs(n);
    residual(s, r);
    double rn = norm_inf(r);
    for (int iter = 0; iter < max_iter && rn >= tol; ++iter) {
        // forward-difference Jacobian over [x; vref; pm_set]
        SimState sp = s;
        for (std::size_t jcol = 0; jcol < n; ++jcol) {
            double* zj = jcol < nx_ ? &sp.x[jcol] : (jcol == nx_ ? &sp.vref : &sp.pm_set);
            const double save = *zj;
            const double h = 1e-7 * std::max(1.0, std::fabs(save));
            *zj = save + h;
            residual(sp, r_trial);
            for (std::size_t rrow = 0; rrow < n; ++rrow)
                jac[rrow * n + jcol] = (r_trial[rrow] - r[rrow]) / h;
            *zj = save;
        }
        for (std::size_t i = 0; i < n; ++i) rhs[i] = -r[i];
        std::vector<double> a = jac;
        if (!solve_linear(a, rhs, n))
            throw SimError("init_equilibrium: singular Jacobian in equilibrium solve");

        double lambda = 1.0;
        bool accepted = false;
        while (lambda >= 1.0 / 1024.0) {
            SimState trial = s;
            for (std::size_t i = 0; i < nx_; ++i) trial.x[i] = s.x[i] + lambda * rhs[i];
            trial.vref = s.vref + lambda * rhs[nx_];
            trial.pm_set = s.pm_set + lambda * rhs[nx_ + 1];
            bool ok = true;
            try {
                residual(trial, r_trial);
            } catch (const SimError&) {
                ok = false;
            }
            if (ok) {
                const double rt = norm_inf(r_trial);
                if (rt < rn || rt < tol) {
                    s = trial;
                    r = r_trial;
                    rn = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted)
            throw SimError("init_equilibrium: equilibrium solve stalled");
    }
    if (!(rn < tol))
        throw SimError("init_equilibrium: equilibrium solve failed to converge");
    return s;
}

} // namespace pscal
