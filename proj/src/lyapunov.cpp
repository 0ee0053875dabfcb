#include "riboflow/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "riboflow/errors.hpp"

namespace riboflow {

namespace {

// x log(x/y) with the x -> 0+ limit 0
double xlogratio(double x, double y) {
    if (x <= 0.0) return 0.0;
    return x * std::log(x / y);
}

double ltv_term(double n, double nb) { return xlogratio(n, nb) + nb - n; }

double lab_term(double l, double a, double b, double n, double nb) {
    if (b == 0.0) return a * ltv_term(n, nb);  // exact reduction, independent of l
    return (a - b) * (nb - n) + a * xlogratio(n, nb) + b * (l + n) * std::log((l + nb) / (l + n));
}

// generator r^3/(l+r^2)
double h32_term(double l, double n, double nb) {
    return (nb - n) + 3.0 * xlogratio(n, nb) + n * std::log((nb * nb + l) / (n * n + l)) +
           2.0 * std::sqrt(l) * (std::atan(nb / std::sqrt(l)) - std::atan(n / std::sqrt(l)));
}

// generator r^2/(l+r^2)
double h22_term(double l, double n, double nb) {
    return 2.0 * xlogratio(n, nb) + n * std::log((nb * nb + l) / (n * n + l)) +
           2.0 * std::sqrt(l) * (std::atan(nb / std::sqrt(l)) - std::atan(n / std::sqrt(l)));
}

// generator r^1.5/(l+r^0.5)
double h1505_term(double l, double n, double nb) {
    const double rn = std::sqrt(n), rnb = std::sqrt(nb);
    return (nb - n) + 1.5 * xlogratio(n, nb) + (n - l * l) * std::log((rnb + l) / (rn + l)) +
           l * (rnb - rn);
}

// 15-point Kronrod / 7-point Gauss pair on [-1, 1]
constexpr double xgk[8] = {0.991455371120813, 0.949107912342759, 0.864864423359769,
                           0.741531185599394, 0.586087235467691, 0.405845151377397,
                           0.207784955007898, 0.0};
constexpr double wgk[8] = {0.022935322010529, 0.063092092629979, 0.104790010322250,
                           0.140653259715525, 0.169004726639267, 0.190350578064785,
                           0.204432940075298, 0.209482141084728};
constexpr double wg[4] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                          0.417959183673469};

template <class F>
double gk15(const F& g, double a, double b, double& err) {
    const double hl = 0.5 * (b - a), c = 0.5 * (a + b);
    double resk = wgk[7] * g(c), resg = wg[3] * g(c);
    for (int j = 0; j < 7; ++j) {
        const double f1 = g(c - hl * xgk[j]), f2 = g(c + hl * xgk[j]);
        resk += wgk[j] * (f1 + f2);
        if (j % 2 == 1) resg += wg[j / 2] * (f1 + f2);
    }
    err = std::abs((resk - resg) * hl);
    return resk * hl;
}

// Adaptive bisection to near machine precision; the integrands are smooth
// after the r = u^2 substitution, so the budget is generous.
template <class F>
double adaptive_quad(const F& g, double a, double b) {
    if (a == b) return 0.0;
    struct Seg {
        double a, b, val, err;
    };
    double err0;
    const double val0 = gk15(g, a, b, err0);
    // near-machine target: profile differentiation amplifies any value noise
    // by the reciprocal sample spacing; the flat floor stays above the
    // roundoff fuzz of the Kronrod error estimate itself
    const double tol = std::max(5e-15, 5e-15 * std::abs(val0));
    std::vector<Seg> segs{{a, b, val0, err0}};
    int evals = 15;
    while (true) {
        double total_err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            total_err += segs[i].err;
            if (segs[i].err > segs[worst].err) worst = i;
        }
        if (total_err <= tol) break;
        if (evals > 30000 ||
            std::abs(segs[worst].b - segs[worst].a) < 1e-14 * std::abs(b - a)) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3e", total_err);
            throw QuadratureFailure(std::string("integral refinement stalled at error ") + buf);
        }
        const Seg s = segs[worst];
        const double mid = 0.5 * (s.a + s.b);
        double e1, e2;
        const double v1 = gk15(g, s.a, mid, e1), v2 = gk15(g, mid, s.b, e2);
        segs[worst] = {s.a, mid, v1, e1};
        segs.push_back({mid, s.b, v2, e2});
        evals += 30;
    }
    double sum = 0.0;
    for (const auto& s : segs) sum += s.val;
    return sum;
}

double general_term(const Transform& theta, double n, double nb) {
    const double log_ref = theta.log_value(nb);
    // r = u^2 turns the integrable log endpoint at r = 0 into u^2 log u
    auto g = [&](double u) {
        if (u <= 0.0) return 0.0;
        return 2.0 * u * (theta.log_value(u * u) - log_ref);
    };
    return adaptive_quad(g, std::sqrt(nb), std::sqrt(n));
}

void check_states(const std::vector<double>& n, const std::vector<double>& nbar) {
    if (n.size() != nbar.size())
        throw BadReference("state and reference dimensions differ: " + std::to_string(n.size()) +
                           " vs " + std::to_string(nbar.size()));
    for (std::size_t i = 0; i < nbar.size(); ++i) {
        if (!(nbar[i] > 0.0))
            throw BadReference("reference coordinate " + std::to_string(i + 1) +
                               " must be positive");
        if (!(n[i] >= 0.0))
            throw BadParameter("state coordinate " + std::to_string(i + 1) + " must be >= 0");
    }
}

std::vector<double> resolve_weights(const LyapunovSpec& spec, std::size_t m) {
    if (spec.weights.empty()) return std::vector<double>(m, 1.0);
    if (spec.weights.size() != m)
        throw BadParameter("weight vector length " + std::to_string(spec.weights.size()) +
                           " does not match dimension " + std::to_string(m));
    for (double w : spec.weights)
        if (!(w > 0.0)) throw BadParameter("weights must be positive");
    return spec.weights;
}

void check_lab_params(double l, const std::vector<double>& a, const std::vector<double>& b,
                      std::size_t m) {
    if (!(l > 0.0)) throw BadParameter("lab family needs l > 0");
    if (a.size() != m || b.size() != m)
        throw BadParameter("lab exponent vectors must have one entry per compartment");
    for (std::size_t i = 0; i < m; ++i)
        if (!(a[i] > 0.0) || !(b[i] >= 0.0) || b[i] > a[i])
            throw BadParameter("lab family needs a_i > 0 and 0 <= b_i <= a_i");
}

double hill_term(HillVariant variant, double l, double n, double nb) {
    switch (variant) {
        case HillVariant::hill_32: return h32_term(l, n, nb);
        case HillVariant::hill_22: return h22_term(l, n, nb);
        case HillVariant::hill_1505: return h1505_term(l, n, nb);
    }
    return 0.0;
}

} // namespace

double v_ltv(const std::vector<double>& n, const std::vector<double>& nbar) {
    check_states(n, nbar);
    double v = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) v += ltv_term(n[i], nbar[i]);
    return v;
}

double v_general(const std::vector<Transform>& thetas, const std::vector<double>& n,
                 const std::vector<double>& nbar) {
    check_states(n, nbar);
    if (thetas.size() != n.size())
        throw BadParameter("need one transform per compartment");
    for (const auto& th : thetas)
        if (!th.strictly_increasing())
            throw BadParameter("integral family needs strictly increasing transforms");
    double v = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) v += general_term(thetas[i], n[i], nbar[i]);
    return v;
}

double v_lab(double l, const std::vector<double>& a, const std::vector<double>& b,
             const std::vector<double>& n, const std::vector<double>& nbar) {
    check_states(n, nbar);
    check_lab_params(l, a, b, n.size());
    double v = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) v += lab_term(l, a[i], b[i], n[i], nbar[i]);
    return v;
}

double v_hill(HillVariant variant, double l, const std::vector<double>& n,
              const std::vector<double>& nbar) {
    check_states(n, nbar);
    if (!(l > 0.0)) throw BadParameter("hill family needs l > 0");
    double v = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) v += hill_term(variant, l, n[i], nbar[i]);
    return v;
}

double lyapunov_value(const LyapunovSpec& spec, const std::vector<double>& n,
                      const std::vector<double>& nbar) {
    check_states(n, nbar);
    const std::size_t m = n.size();
    const auto w = resolve_weights(spec, m);
    switch (spec.kind) {
        case LyapunovSpec::Kind::lab: check_lab_params(spec.l, spec.a, spec.b, m); break;
        case LyapunovSpec::Kind::hill_32:
        case LyapunovSpec::Kind::hill_22:
        case LyapunovSpec::Kind::hill_1505:
            if (!(spec.l > 0.0)) throw BadParameter("hill family needs l > 0");
            break;
        case LyapunovSpec::Kind::general_integral:
            if (spec.thetas.size() != m)
                throw BadParameter("need one transform per compartment");
            break;
        default: break;
    }
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double term = 0.0;
        switch (spec.kind) {
            case LyapunovSpec::Kind::ltv: term = ltv_term(n[i], nbar[i]); break;
            case LyapunovSpec::Kind::general_integral:
                term = general_term(spec.thetas[i], n[i], nbar[i]);
                break;
            case LyapunovSpec::Kind::lab:
                term = lab_term(spec.l, spec.a[i], spec.b[i], n[i], nbar[i]);
                break;
            case LyapunovSpec::Kind::hill_32: term = h32_term(spec.l, n[i], nbar[i]); break;
            case LyapunovSpec::Kind::hill_22: term = h22_term(spec.l, n[i], nbar[i]); break;
            case LyapunovSpec::Kind::hill_1505: term = h1505_term(spec.l, n[i], nbar[i]); break;
        }
        v += w[i] * term;
    }
    return v;
}

std::vector<double> lyapunov_gradient(const LyapunovSpec& spec, const std::vector<double>& n,
                                      const std::vector<double>& nbar) {
    check_states(n, nbar);
    const std::size_t m = n.size();
    const auto w = resolve_weights(spec, m);
    std::vector<double> g(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = n[i], xb = nbar[i], l = spec.l;
        double d = 0.0;
        switch (spec.kind) {
            case LyapunovSpec::Kind::ltv: d = std::log(x / xb); break;
            case LyapunovSpec::Kind::general_integral:
                d = spec.thetas[i].log_value(x) - spec.thetas[i].log_value(xb);
                break;
            case LyapunovSpec::Kind::lab:
                d = spec.a[i] * std::log(x / xb) - spec.b[i] * std::log((l + x) / (l + xb));
                break;
            case LyapunovSpec::Kind::hill_32:
                d = 3.0 * std::log(x / xb) - std::log((l + x * x) / (l + xb * xb));
                break;
            case LyapunovSpec::Kind::hill_22:
                d = 2.0 * std::log(x / xb) - std::log((l + x * x) / (l + xb * xb));
                break;
            case LyapunovSpec::Kind::hill_1505:
                d = 1.5 * std::log(x / xb) -
                    std::log((l + std::sqrt(x)) / (l + std::sqrt(xb)));
                break;
        }
        g[i] = w[i] * d;
    }
    return g;
}

LyapunovProfile lyapunov_profile(const Trajectory& traj, const LyapunovSpec& spec,
                                 const std::vector<double>& nbar) {
    const std::size_t N = traj.times.size();
    if (N == 0) throw BadReference("empty trajectory");
    LyapunovProfile prof;
    prof.values.resize(N);
    std::vector<double> n(traj.m);
    for (std::size_t k = 0; k < N; ++k) {
        std::copy_n(traj.states[k].begin(), traj.m, n.begin());
        prof.values[k] = lyapunov_value(spec, n, nbar);
    }
    prof.derivative_estimates.assign(N, 0.0);
    if (N < 2) return prof;
    const auto& t = traj.times;
    const auto& v = prof.values;
    auto& dv = prof.derivative_estimates;

    const double h = t[1] - t[0];
    bool uniform = true;
    for (std::size_t k = 0; k + 1 < N; ++k)
        if (std::abs(t[k + 1] - t[k] - h) > 1e-6 * h) uniform = false;

    if (uniform && N >= 5) {
        dv[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h);
        dv[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h);
        for (std::size_t k = 2; k + 2 < N; ++k)
            dv[k] = (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * h);
        dv[N - 2] =
            (3.0 * v[N - 1] + 10.0 * v[N - 2] - 18.0 * v[N - 3] + 6.0 * v[N - 4] - v[N - 5]) /
            (12.0 * h);
        dv[N - 1] =
            (25.0 * v[N - 1] - 48.0 * v[N - 2] + 36.0 * v[N - 3] - 16.0 * v[N - 4] +
             3.0 * v[N - 5]) /
            (12.0 * h);
    } else {
        dv[0] = (v[1] - v[0]) / (t[1] - t[0]);
        for (std::size_t k = 1; k + 1 < N; ++k) {
            const double hl = t[k] - t[k - 1], hr = t[k + 1] - t[k];
            dv[k] = (v[k + 1] * hl * hl - v[k - 1] * hr * hr + v[k] * (hr * hr - hl * hl)) /
                    (hl * hr * (hl + hr));
        }
        dv[N - 1] = (v[N - 1] - v[N - 2]) / (t[N - 1] - t[N - 2]);
    }
    return prof;
}

std::vector<double> lyapunov_chain_rule(const Trajectory& traj, const LyapunovSpec& spec,
                                        const std::vector<double>& nbar,
                                        const CompartmentalModel& model,
                                        const std::vector<RateSpec>& rates) {
    const std::size_t N = traj.times.size();
    std::vector<double> out(N, 0.0);
    std::vector<double> n(model.m), s(model.m), dn(model.m);
    for (std::size_t k = 0; k < N; ++k) {
        const auto& row = traj.states[k];
        std::copy_n(row.begin(), model.m, n.begin());
        if (traj.full) {
            for (int i = 0; i < model.m; ++i) s[i] = std::max(row[model.m + i], 0.0);
            std::fill(dn.begin(), dn.end(), 0.0);
            for (const auto& r : rates) {
                const double flow = eval_rate(r, n, s, traj.times[k]);
                dn[r.edge.first] -= flow;
                dn[r.edge.second] += flow;
            }
        } else {
            reduced_vector_field(model, rates, traj.times[k], n, dn);
        }
        const auto g = lyapunov_gradient(spec, n, nbar);
        double acc = 0.0;
        for (int i = 0; i < model.m; ++i) acc += g[i] * dn[i];
        out[k] = acc;
    }
    return out;
}

} // namespace riboflow
