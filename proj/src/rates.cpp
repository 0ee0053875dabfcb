#include "riboflow/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "riboflow/errors.hpp"

namespace riboflow {

// ---------------------------------------------------------------------------
// Transform

double Transform::operator()(double r) const {
    if (r <= 0.0) return 0.0;
    switch (kind) {
        case Kind::identity: return r;
        case Kind::power: return std::pow(r, a);
        case Kind::monod: return r / (l + r);
        case Kind::hill_ratio: {
            double rl = std::pow(r, L);
            return rl / (l + rl);
        }
        case Kind::power_over_shifted_power: return std::pow(r, a) / std::pow(l + r, b);
        case Kind::hill_general: return std::pow(r, a) / (l + std::pow(r, b));
    }
    return 0.0;
}

double Transform::log_value(double r) const {
    if (r <= 0.0) return -std::numeric_limits<double>::infinity();
    switch (kind) {
        case Kind::identity: return std::log(r);
        case Kind::power: return a * std::log(r);
        case Kind::monod: return std::log(r) - std::log(l + r);
        case Kind::hill_ratio: {
            double rl = std::pow(r, L);
            return L * std::log(r) - std::log(l + rl);
        }
        case Kind::power_over_shifted_power: return a * std::log(r) - b * std::log(l + r);
        case Kind::hill_general: return a * std::log(r) - std::log(l + std::pow(r, b));
    }
    return 0.0;
}

double Transform::theta_hat(double r) const {
    r = std::max(r, 0.0);
    // r^(a-1) with its r -> 0+ limit at the boundary (infinite when a < 1)
    auto pow_limit = [](double r_, double e) {
        if (r_ > 0.0) return std::pow(r_, e);
        if (e > 0.0) return 0.0;
        if (e == 0.0) return 1.0;
        return std::numeric_limits<double>::infinity();
    };
    switch (kind) {
        case Kind::identity: return 1.0;
        case Kind::power: return pow_limit(r, a - 1.0);
        case Kind::monod: return 1.0 / (l + r);
        case Kind::hill_ratio: return pow_limit(r, L - 1.0) / (l + std::pow(r, L));
        case Kind::power_over_shifted_power: return pow_limit(r, a - 1.0) / std::pow(l + r, b);
        case Kind::hill_general: return pow_limit(r, a - 1.0) / (l + std::pow(r, b));
    }
    return 0.0;
}

bool Transform::strictly_increasing() const {
    switch (kind) {
        case Kind::identity:
        case Kind::monod: return true;
        case Kind::power: return a > 0.0;
        case Kind::hill_ratio: return L > 0.0;
        case Kind::power_over_shifted_power: return a > 0.0 && a >= b;
        case Kind::hill_general: return a > 0.0 && a >= b;
    }
    return false;
}

Transform Transform::identity() { return {}; }

Transform Transform::power(double a) {
    if (!(a > 0.0)) throw BadParameter("power transform needs exponent > 0");
    Transform t;
    t.kind = Kind::power;
    t.a = a;
    return t;
}

Transform Transform::monod(double l) {
    if (!(l > 0.0)) throw BadParameter("monod transform needs l > 0");
    Transform t;
    t.kind = Kind::monod;
    t.l = l;
    return t;
}

Transform Transform::hill_ratio(double l, double L) {
    if (!(l > 0.0) || !(L >= 1.0)) throw BadParameter("hill_ratio transform needs l > 0, L >= 1");
    Transform t;
    t.kind = Kind::hill_ratio;
    t.l = l;
    t.L = L;
    return t;
}

Transform Transform::power_over_shifted_power(double l, double a, double b) {
    if (!(l > 0.0) || !(a > 0.0) || !(b >= 0.0) || !(a >= b))
        throw BadParameter("power_over_shifted_power needs l > 0 and a >= b >= 0, a > 0");
    Transform t;
    t.kind = Kind::power_over_shifted_power;
    t.l = l;
    t.a = a;
    t.b = b;
    return t;
}

Transform Transform::hill_general(double l, double p, double q) {
    if (!(l > 0.0) || !(p > 0.0) || !(q >= 0.0) || !(p >= q))
        throw BadParameter("hill_general needs l > 0 and p >= q >= 0, p > 0");
    Transform t;
    t.kind = Kind::hill_general;
    t.l = l;
    t.a = p;
    t.b = q;
    return t;
}

// ---------------------------------------------------------------------------
// TimeCoefficient

double TimeCoefficient::operator()(double t) const {
    switch (kind) {
        case Kind::constant: return kbar;
        case Kind::decaying: return kbar * (1.0 + amplitude * std::exp(-rate * t));
        case Kind::sinusoid: return kbar * (offset + amplitude * std::cos(frequency * t + phase));
        case Kind::piecewise: {
            std::size_t seg = 0;
            for (std::size_t i = 0; i < segments.size(); ++i)
                if (t >= segments[i].first) seg = i;
            return segments[seg].second(t);
        }
    }
    return 0.0;
}

double TimeCoefficient::lower_bound() const {
    switch (kind) {
        case Kind::constant: return kbar;
        case Kind::decaying: return amplitude >= 0.0 ? kbar : kbar * (1.0 + amplitude);
        case Kind::sinusoid: return kbar * (offset - std::abs(amplitude));
        case Kind::piecewise: {
            double lo = std::numeric_limits<double>::infinity();
            for (const auto& [tb, c] : segments) lo = std::min(lo, c.lower_bound());
            return lo;
        }
    }
    return 0.0;
}

double TimeCoefficient::upper_bound() const {
    switch (kind) {
        case Kind::constant: return kbar;
        case Kind::decaying: return amplitude >= 0.0 ? kbar * (1.0 + amplitude) : kbar;
        case Kind::sinusoid: return kbar * (offset + std::abs(amplitude));
        case Kind::piecewise: {
            double hi = 0.0;
            for (const auto& [tb, c] : segments) hi = std::max(hi, c.upper_bound());
            return hi;
        }
    }
    return 0.0;
}

std::optional<double> TimeCoefficient::period() const {
    switch (kind) {
        case Kind::constant: return 0.0;
        case Kind::sinusoid:
            return amplitude == 0.0 ? 0.0 : 2.0 * std::acos(-1.0) / frequency;
        case Kind::decaying:
        case Kind::piecewise: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<double> TimeCoefficient::breakpoints() const {
    if (kind != Kind::piecewise) return {};
    std::vector<double> bps;
    for (const auto& [tb, c] : segments) {
        bps.push_back(tb);
        auto inner = c.breakpoints();
        bps.insert(bps.end(), inner.begin(), inner.end());
    }
    std::sort(bps.begin(), bps.end());
    bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
    return bps;
}

TimeCoefficient TimeCoefficient::constant(double kbar) {
    if (!(kbar > 0.0) || !std::isfinite(kbar)) throw BadParameter("constant coefficient must be positive and finite");
    TimeCoefficient c;
    c.kbar = kbar;
    return c;
}

TimeCoefficient TimeCoefficient::decaying(double kbar, double amplitude, double rate) {
    if (!(kbar > 0.0) || !(rate > 0.0) || !(1.0 + amplitude > 0.0))
        throw BadParameter("decaying coefficient needs kbar > 0, rate > 0, 1 + amplitude > 0");
    TimeCoefficient c;
    c.kind = Kind::decaying;
    c.kbar = kbar;
    c.amplitude = amplitude;
    c.rate = rate;
    return c;
}

TimeCoefficient TimeCoefficient::sinusoid(double kbar, double offset, double amplitude,
                                          double frequency, double phase) {
    if (!(kbar > 0.0) || !(offset - std::abs(amplitude) > 0.0) || !(frequency > 0.0))
        throw BadParameter("sinusoid coefficient needs kbar > 0, offset > |amplitude|, frequency > 0");
    TimeCoefficient c;
    c.kind = Kind::sinusoid;
    c.kbar = kbar;
    c.offset = offset;
    c.amplitude = amplitude;
    c.frequency = frequency;
    c.phase = phase;
    return c;
}

TimeCoefficient TimeCoefficient::piecewise(std::vector<std::pair<double, TimeCoefficient>> segments) {
    if (segments.empty()) throw BadParameter("piecewise coefficient needs at least one segment");
    for (std::size_t i = 0; i + 1 < segments.size(); ++i)
        if (!(segments[i].first < segments[i + 1].first))
            throw BadParameter("piecewise breakpoints must be strictly increasing");
    TimeCoefficient c;
    c.kind = Kind::piecewise;
    c.segments = std::move(segments);
    return c;
}

// ---------------------------------------------------------------------------
// DenominatorPoly

double DenominatorPoly::operator()(const std::vector<double>& n, const std::vector<double>& s) const {
    double total = 0.0;
    for (const Term& term : terms) {
        double mono = term.alpha;
        for (std::size_t i = 0; i < term.r1.size() && i < n.size(); ++i)
            for (int e = 0; e < term.r1[i]; ++e) mono *= n[i];
        for (std::size_t j = 0; j < term.r2.size() && j < s.size(); ++j)
            for (int e = 0; e < term.r2[j]; ++e) mono *= s[j];
        total += mono;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Rate evaluation and factorizations

double eval_rate(const RateSpec& spec, const std::vector<double>& n, const std::vector<double>& s,
                 double t) {
    auto [i, j] = spec.edge;
    if (!std::isfinite(n[i]) || !std::isfinite(s[j]) || !std::isfinite(t))
        throw NonFiniteInput("rate evaluation given non-finite state or time");
    double num = spec.theta(n[i]) * spec.nu(s[j]);
    if (num == 0.0) return 0.0;
    return spec.k(t) * num / (1.0 + spec.psi(n, s));
}

RateEnvelope rate_envelope(const RateSpec& spec, const std::vector<double>& capacities) {
    double k_sup = spec.k.upper_bound();
    if (!std::isfinite(k_sup))
        throw UnboundedCoefficient("time coefficient has no finite upper bound");
    RateEnvelope env;
    env.theta = spec.theta;
    env.nu = spec.nu;
    env.upper_coefficient = k_sup;
    env.lower_coefficient = spec.k.lower_bound() / (1.0 + spec.psi(capacities, capacities));
    return env;
}

RateSpec make_mass_action(TimeCoefficient k) {
    RateSpec spec;
    spec.k = std::move(k);
    spec.theta = Transform::identity();
    spec.nu = Transform::identity();
    return spec;
}

RateSpec make_monod(double l, TimeCoefficient k) {
    RateSpec spec;
    spec.k = std::move(k);
    spec.theta = Transform::monod(l);
    spec.nu = Transform::monod(l);
    return spec;
}

RateSpec make_hill(double l, double L, TimeCoefficient k) {
    RateSpec spec;
    spec.k = std::move(k);
    spec.theta = Transform::hill_ratio(l, L);
    spec.nu = Transform::hill_ratio(l, L);
    return spec;
}

RateSpec make_modified_hill(double l, TimeCoefficient k) {
    RateSpec spec;
    spec.k = std::move(k);
    spec.theta = Transform::hill_general(l, 3.0, 2.0);
    spec.nu = Transform::hill_general(l, 3.0, 2.0);
    return spec;
}

namespace {

double factored_common(const RateSpec& spec, const std::vector<double>& n, double t,
                       const std::vector<double>& capacities) {
    auto [i, j] = spec.edge;
    (void)i;
    double s_j = capacities[j] - n[j];
    double value = spec.k(t) * spec.nu(s_j);
    if (spec.psi.empty()) return value;
    std::vector<double> s(capacities.size());
    for (std::size_t q = 0; q < s.size(); ++q) s[q] = capacities[q] - n[q];
    return value / (1.0 + spec.psi(n, s));
}

} // namespace

double factor_general(const RateSpec& spec, const std::vector<double>& n, double t,
                      const std::vector<double>& capacities) {
    if (!std::isfinite(t)) throw NonFiniteInput("factorization given non-finite time");
    return factored_common(spec, n, t, capacities);
}

double factor_quasi_ltv(const RateSpec& spec, const std::vector<double>& n, double t,
                        const std::vector<double>& capacities) {
    if (!std::isfinite(t)) throw NonFiniteInput("factorization given non-finite time");
    return factored_common(spec, n, t, capacities) * spec.theta.theta_hat(n[spec.edge.first]);
}

} // namespace riboflow
