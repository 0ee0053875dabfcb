#include "riboflow/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <utility>

#include "riboflow/errors.hpp"

namespace riboflow {

namespace {

using Rhs = std::function<void(double, const std::vector<double>&, std::vector<double>&)>;

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::vector<double> sample_grid(double t_end, double stride) {
    std::vector<double> ts{0.0};
    if (t_end <= 0.0) return ts;
    const double tiny = 1e-9 * stride;
    for (std::int64_t k = 1;; ++k) {
        const double t = static_cast<double>(k) * stride;
        if (t >= t_end - tiny) break;
        ts.push_back(t);
    }
    ts.push_back(t_end);
    return ts;
}

std::vector<double> interior_breakpoints(const std::vector<RateSpec>& rates, double t_end) {
    std::vector<double> bp;
    for (const auto& r : rates)
        for (double b : r.k.breakpoints())
            if (b > 0.0 && b < t_end) bp.push_back(b);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end(),
                         [](double x, double y) { return std::abs(x - y) < 1e-12; }),
             bp.end());
    return bp;
}

void check_finite(const std::vector<double>& y, double t) {
    for (double v : y)
        if (!std::isfinite(v))
            throw NonFiniteState("non-finite state reached at t = " + fmt(t));
}

// Dormand-Prince 5(4) with the Shampine dense-output interpolant.
struct Dp54 {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0;
    static constexpr double d3 = 87487479700.0 / 32700410799.0;
    static constexpr double d4 = -10690763975.0 / 1880347072.0;
    static constexpr double d5 = 701980252875.0 / 199316789632.0;
    static constexpr double d6 = -1453857185.0 / 822651844.0;
    static constexpr double d7 = 69997945.0 / 29380423.0;

    const Rhs& f;
    int dim;
    double rel_tol, abs_tol, max_step;
    // left limit of the active segment: coefficients may jump at its right
    // boundary, so no stage may evaluate at or past it
    double t_clip = std::numeric_limits<double>::infinity();

    std::vector<double> k1, k2, k3, k4, k5, k6, k7, ys, y1;
    std::vector<double> r1, r2, r3, r4, r5;  // dense-output coefficients

    Dp54(const Rhs& f_, int dim_, const SimOptions& o)
        : f(f_), dim(dim_), rel_tol(o.rel_tol), abs_tol(o.abs_tol), max_step(o.max_step) {
        for (auto* v : {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &ys, &y1, &r1, &r2, &r3, &r4, &r5})
            v->assign(dim, 0.0);
    }

    void stages(double t, const std::vector<double>& y, double h) {
        auto ct = [this](double tt) { return std::min(tt, t_clip); };
        for (int i = 0; i < dim; ++i) ys[i] = y[i] + h * a21 * k1[i];
        f(ct(t + c2 * h), ys, k2);
        for (int i = 0; i < dim; ++i) ys[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(ct(t + c3 * h), ys, k3);
        for (int i = 0; i < dim; ++i) ys[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(ct(t + c4 * h), ys, k4);
        for (int i = 0; i < dim; ++i)
            ys[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(ct(t + c5 * h), ys, k5);
        for (int i = 0; i < dim; ++i)
            ys[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(ct(t + h), ys, k6);
        for (int i = 0; i < dim; ++i)
            y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        f(ct(t + h), y1, k7);  // FSAL
    }

    double error_norm(const std::vector<double>& y, double h) const {
        double acc = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                  e7 * k7[i]);
            const double sc = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y1[i]));
            acc += (e / sc) * (e / sc);
        }
        return std::sqrt(acc / dim);
    }

    void dense_prepare(const std::vector<double>& y, double h) {
        for (int i = 0; i < dim; ++i) {
            const double ydiff = y1[i] - y[i];
            const double bspl = h * k1[i] - ydiff;
            r1[i] = y[i];
            r2[i] = ydiff;
            r3[i] = bspl;
            r4[i] = ydiff - h * k7[i] - bspl;
            r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                         d7 * k7[i]);
        }
    }

    void dense_eval(double theta, std::vector<double>& out) const {
        const double th1 = 1.0 - theta;
        for (int i = 0; i < dim; ++i)
            out[i] = r1[i] + theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])));
    }

    // Integrates over [t0, t_end] honoring mandatory boundaries, emitting the
    // requested samples (strictly increasing, first == t0) via emit.
    void run(std::vector<double> y, double t0, double t_end, const std::vector<double>& boundaries,
             const std::vector<double>& samples,
             const std::function<void(double, const std::vector<double>&)>& emit) {
        std::size_t si = 0;
        while (si < samples.size() && samples[si] <= t0) emit(samples[si++], y);

        std::vector<double> bounds{t0};
        bounds.insert(bounds.end(), boundaries.begin(), boundaries.end());
        bounds.push_back(t_end);

        std::vector<double> row(dim);
        double h = 0.0;
        for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
            double t = bounds[seg];
            const double tb = bounds[seg + 1];
            t_clip = seg + 2 < bounds.size() ? std::nextafter(tb, t)
                                             : std::numeric_limits<double>::infinity();
            f(t, y, k1);  // fresh slope: coefficients may jump at boundaries
            if (h <= 0.0) h = 0.1 * std::min(samples.size() > 1 ? samples[1] - samples[0] : tb - t,
                                             tb - t);
            bool rejected = false;
            while (t < tb) {
                if (max_step > 0.0) h = std::min(h, max_step);
                h = std::min(h, tb - t);
                // a step aimed at tb can land one ulp short; close the sliver
                if (tb - t <= 5e-16 * std::max(1.0, std::abs(tb))) {
                    t = tb;
                    break;
                }
                if (h < 1e-13 * std::max(1.0, std::abs(t)))
                    throw StepSizeUnderflow("step size underflow at t = " + fmt(t));
                stages(t, y, h);
                const double err = error_norm(y, h);
                if (err > 1.0) {
                    h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
                    rejected = true;
                    continue;
                }
                const double t_new = t + h;
                check_finite(y1, t_new);
                const double tiny = 1e-12 * std::max(1.0, std::abs(t_new));
                if (si < samples.size() && samples[si] <= t_new + tiny) {
                    dense_prepare(y, h);
                    while (si < samples.size() && samples[si] <= t_new + tiny) {
                        if (samples[si] >= t_new - tiny) {
                            emit(samples[si], y1);
                        } else {
                            dense_eval((samples[si] - t) / h, row);
                            emit(samples[si], row);
                        }
                        ++si;
                    }
                }
                y.swap(y1);
                k1.swap(k7);
                t = t_new;
                double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
                fac = std::clamp(fac, 0.2, rejected ? 1.0 : 5.0);
                h *= fac;
                rejected = false;
            }
        }
        while (si < samples.size()) emit(samples[si++], y);  // numerical leftovers at t_end
    }
};

// Classical fixed-step RK4 on the sample grid, splitting internally at
// coefficient breakpoints so discontinuities stay on step boundaries.
void rk4_run(const Rhs& f, int dim, std::vector<double> y, const std::vector<double>& boundaries,
             const std::vector<double>& samples,
             const std::function<void(double, const std::vector<double>&)>& emit) {
    emit(samples[0], y);
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), ys(dim);
    for (std::size_t s = 0; s + 1 < samples.size(); ++s) {
        std::vector<double> pts{samples[s]};
        for (double b : boundaries)
            if (b > samples[s] && b < samples[s + 1]) pts.push_back(b);
        pts.push_back(samples[s + 1]);
        for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
            const double t = pts[p], h = pts[p + 1] - pts[p];
            // evaluate the closing stage on the left limit of the sub-interval
            const double te = std::nextafter(pts[p + 1], t);
            f(t, y, k1);
            for (int i = 0; i < dim; ++i) ys[i] = y[i] + 0.5 * h * k1[i];
            f(t + 0.5 * h, ys, k2);
            for (int i = 0; i < dim; ++i) ys[i] = y[i] + 0.5 * h * k2[i];
            f(t + 0.5 * h, ys, k3);
            for (int i = 0; i < dim; ++i) ys[i] = y[i] + h * k3[i];
            f(te, ys, k4);
            for (int i = 0; i < dim; ++i)
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_finite(y, samples[s + 1]);
        emit(samples[s + 1], y);
    }
}

void validate_options(const SimOptions& o) {
    if (!(o.rel_tol > 0.0) || !(o.abs_tol > 0.0))
        throw BadParameter("integration tolerances must be positive");
    if (!(o.t_end >= 0.0)) throw BadParameter("t_end must be nonnegative");
    if (!(o.dense_output_stride > 0.0)) throw BadParameter("dense_output_stride must be positive");
}

void validate_rates(const CompartmentalModel& model, const std::vector<RateSpec>& rates) {
    if (rates.size() != model.transitions.size())
        throw BadParameter("expected one rate per transition, got " +
                           std::to_string(rates.size()) + " for " +
                           std::to_string(model.transitions.size()) + " transitions");
    for (const auto& r : rates)
        if (model.edge_index(r.edge.first, r.edge.second) < 0)
            throw BadReference("rate attached to absent transition (" +
                               std::to_string(r.edge.first + 1) + ", " +
                               std::to_string(r.edge.second + 1) + ")");
}

// Output-row clipping: overshoot within abs_tol is snapped to the boundary,
// anything larger is an integration failure, not a repair case.
void clip_row(std::vector<double>& row, const std::vector<double>& caps, bool full, double tol,
              double t) {
    const int m = static_cast<int>(caps.size());
    const int dim = static_cast<int>(row.size());
    for (int i = 0; i < dim; ++i) {
        double& v = row[i];
        if (v < 0.0) {
            if (v < -tol)
                throw CapacityViolation("coordinate " + std::to_string(i + 1) + " = " + fmt(v) +
                                        " below 0 at t = " + fmt(t));
            v = 0.0;
        } else if (!full && i < m && v > caps[i]) {
            if (v - caps[i] > tol)
                throw CapacityViolation("n_" + std::to_string(i + 1) + " = " + fmt(v) +
                                        " above capacity " + fmt(caps[i]) + " at t = " + fmt(t));
            v = caps[i];
        }
    }
}

Trajectory integrate(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                     const Rhs& f, std::vector<double> y0, const SimOptions& opts, bool full) {
    validate_options(opts);
    Trajectory traj;
    traj.capacities = model.capacities;
    traj.full = full;
    traj.m = model.m;
    for (int i = 0; i < model.m; ++i) traj.level += y0[i];

    const auto samples = sample_grid(opts.t_end, opts.dense_output_stride);
    auto emit = [&](double t, const std::vector<double>& y) {
        std::vector<double> row(y);
        clip_row(row, model.capacities, full, opts.abs_tol, t);
        traj.times.push_back(t);
        traj.states.push_back(std::move(row));
    };
    if (samples.size() == 1) {
        emit(0.0, y0);
        return traj;
    }
    const auto bp = interior_breakpoints(rates, opts.t_end);
    const int dim = static_cast<int>(y0.size());
    if (opts.method == Method::adaptive_rk45) {
        Dp54 engine(f, dim, opts);
        engine.run(std::move(y0), 0.0, opts.t_end, bp, samples, emit);
    } else {
        rk4_run(f, dim, std::move(y0), bp, samples, emit);
    }
    return traj;
}

} // namespace

void reduced_vector_field(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                          double t, const std::vector<double>& n, std::vector<double>& dn) {
    const int m = model.m;
    thread_local std::vector<double> nc, sc;
    nc.assign(n.begin(), n.begin() + m);
    sc.resize(m);
    for (int i = 0; i < m; ++i) {
        nc[i] = std::clamp(nc[i], 0.0, model.capacities[i]);
        sc[i] = model.capacities[i] - nc[i];
    }
    dn.assign(m, 0.0);
    for (const auto& r : rates) {
        const double flow = eval_rate(r, nc, sc, t);
        dn[r.edge.first] -= flow;
        dn[r.edge.second] += flow;
    }
}

Trajectory simulate_reduced(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                            const std::vector<double>& n0, const SimOptions& opts) {
    validate_rates(model, rates);
    if (static_cast<int>(n0.size()) != model.m)
        throw BadParameter("initial state has " + std::to_string(n0.size()) + " entries for " +
                           std::to_string(model.m) + " compartments");
    for (int i = 0; i < model.m; ++i)
        if (!(n0[i] >= 0.0) || n0[i] > model.capacities[i])
            throw BadParameter("n0_" + std::to_string(i + 1) + " = " + fmt(n0[i]) +
                               " outside [0, " + fmt(model.capacities[i]) + "]");
    Rhs f = [&model, &rates](double t, const std::vector<double>& y, std::vector<double>& dy) {
        reduced_vector_field(model, rates, t, y, dy);
    };
    return integrate(model, rates, f, n0, opts, false);
}

Trajectory simulate_full(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                         const std::vector<double>& n0, const std::vector<double>& s0,
                         const SimOptions& opts) {
    validate_rates(model, rates);
    const int m = model.m;
    if (static_cast<int>(n0.size()) != m || static_cast<int>(s0.size()) != m)
        throw BadParameter("initial vectors must each have one entry per compartment");
    for (int i = 0; i < m; ++i)
        if (!(n0[i] >= 0.0) || !(s0[i] >= 0.0))
            throw BadParameter("full-system initial state must be nonnegative");
    Rhs f = [&model, &rates, m](double t, const std::vector<double>& y, std::vector<double>& dy) {
        thread_local std::vector<double> nc, sc;
        nc.assign(y.begin(), y.begin() + m);
        sc.assign(y.begin() + m, y.end());
        for (int i = 0; i < m; ++i) {
            nc[i] = std::max(nc[i], 0.0);
            sc[i] = std::max(sc[i], 0.0);
        }
        dy.assign(2 * m, 0.0);
        for (const auto& r : rates) {
            const double flow = eval_rate(r, nc, sc, t);
            const int i = r.edge.first, j = r.edge.second;
            dy[i] -= flow;
            dy[j] += flow;
            dy[m + i] += flow;  // each transfer swaps one particle for one hole
            dy[m + j] -= flow;
        }
    };
    std::vector<double> y0(n0);
    y0.insert(y0.end(), s0.begin(), s0.end());
    return integrate(model, rates, f, std::move(y0), opts, true);
}

ConservationReport conservation_report(const Trajectory& traj) {
    ConservationReport rep;
    if (traj.states.empty()) return rep;
    const int m = traj.m;
    const auto& first = traj.states.front();
    double tot0 = 0.0;
    for (double v : first) tot0 += v;
    const double tot_den = std::abs(tot0) > 0.0 ? std::abs(tot0) : 1.0;
    for (const auto& row : traj.states) {
        double tot = 0.0;
        for (double v : row) tot += v;
        rep.max_total_drift = std::max(rep.max_total_drift, std::abs(tot - tot0) / tot_den);
        if (traj.full) {
            for (int i = 0; i < m; ++i) {
                const double h0 = first[i] + first[m + i];
                const double den = std::abs(h0) > 0.0 ? std::abs(h0) : 1.0;
                rep.max_percompartment_drift =
                    std::max(rep.max_percompartment_drift,
                             std::abs(row[i] + row[m + i] - h0) / den);
            }
        }
    }
    return rep;
}

double persistence_margin(const Trajectory& traj, double tau) {
    if (traj.states.empty()) throw EmptyWindow("empty trajectory");
    if (tau > traj.times.back())
        throw EmptyWindow("window start " + fmt(tau) + " beyond trajectory end " +
                          fmt(traj.times.back()));
    double cap_total = 0.0;
    for (double c : traj.capacities) cap_total += c;
    if (traj.level <= 0.0 || traj.level >= cap_total) return 0.0;  // degenerate level set
    double margin = std::numeric_limits<double>::infinity();
    const int m = traj.m;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        if (traj.times[k] < tau) continue;
        const auto& row = traj.states[k];
        for (int i = 0; i < m; ++i) {
            const double free_side = traj.full ? row[m + i] : traj.capacities[i] - row[i];
            margin = std::min(margin, std::min(row[i], free_side));
        }
    }
    return margin;
}

} // namespace riboflow
