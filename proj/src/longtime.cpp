#include "riboflow/longtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "riboflow/errors.hpp"

namespace riboflow {

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string edge_name(const std::pair<int, int>& e) {
    return "(" + std::to_string(e.first + 1) + "," + std::to_string(e.second + 1) + ")";
}

void require_time_invariant(const std::vector<RateSpec>& rates) {
    for (const auto& r : rates)
        if (r.k.kind != TimeCoefficient::Kind::constant)
            throw BadParameter("coefficient on edge " + edge_name(r.edge) +
                               " varies in time; equilibrium analysis needs constants");
}

double field_norm(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                  const std::vector<double>& n, std::vector<double>& f) {
    reduced_vector_field(model, rates, 0.0, n, f);
    double mx = 0.0;
    for (double v : f) mx = std::max(mx, std::abs(v));
    return mx;
}

SimOptions rest_options(double chunk) {
    SimOptions o;
    o.rel_tol = 1e-10;
    o.abs_tol = 1e-12;
    o.t_end = chunk;
    o.dense_output_stride = chunk;
    return o;
}

// Integrate in doubling chunks until the vector field norm drops below
// pre_tol; the relevant dynamics contract exponentially, so the doubling
// reaches any fixed horizon in O(log) chunks.
std::vector<double> simulate_to_rest(const CompartmentalModel& model,
                                     const std::vector<RateSpec>& rates, std::vector<double> n,
                                     double pre_tol, double& elapsed) {
    std::vector<double> f(model.m);
    double chunk = 0.25;
    elapsed = 0.0;
    double fn = field_norm(model, rates, n, f);
    while (fn > pre_tol) {
        if (elapsed > 1e6)
            throw NoConvergence("transient has not settled after horizon 1e6, field norm " +
                                fmt(fn));
        Trajectory tr = simulate_reduced(model, rates, n, rest_options(chunk));
        n = tr.states.back();
        elapsed += chunk;
        chunk = std::min(2.0 * chunk, 2.5e5);
        fn = field_norm(model, rates, n, f);
    }
    return n;
}

// Gaussian elimination with partial pivoting; a is row-major m x m.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> rhs, int m) {
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int row = col + 1; row < m; ++row)
            if (std::abs(a[row * m + col]) > std::abs(a[piv * m + col])) piv = row;
        if (std::abs(a[piv * m + col]) < 1e-300)
            throw NoConvergence("singular Jacobian in equilibrium refinement");
        if (piv != col) {
            for (int j = 0; j < m; ++j) std::swap(a[col * m + j], a[piv * m + j]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (int row = col + 1; row < m; ++row) {
            const double fac = a[row * m + col] / a[col * m + col];
            if (fac == 0.0) continue;
            for (int j = col; j < m; ++j) a[row * m + j] -= fac * a[col * m + j];
            rhs[row] -= fac * rhs[col];
        }
    }
    std::vector<double> x(m);
    for (int row = m - 1; row >= 0; --row) {
        double acc = rhs[row];
        for (int j = row + 1; j < m; ++j) acc -= a[row * m + j] * x[j];
        x[row] = acc / a[row * m + row];
    }
    return x;
}

EquilibriumResult newton_polish(const CompartmentalModel& model,
                                const std::vector<RateSpec>& rates, std::vector<double> n,
                                double tol) {
    const int m = model.m;
    std::vector<double> f(m), fp(m), fm(m), trial(m), jac(m * m);
    double fn = field_norm(model, rates, n, f);
    int iter = 0;
    while (fn > tol && iter < 60) {
        ++iter;
        for (int j = 0; j < m; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(n[j]));
            const double saved = n[j];
            n[j] = saved + h;
            reduced_vector_field(model, rates, 0.0, n, fp);
            n[j] = saved - h;
            reduced_vector_field(model, rates, 0.0, n, fm);
            n[j] = saved;
            for (int i = 0; i < m; ++i) jac[i * m + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
        // the flow conserves sum n_i, so the Jacobian rows are linearly
        // dependent; replace the last equation with the level constraint
        std::vector<double> a(jac), rhs(m);
        for (int i = 0; i < m; ++i) rhs[i] = -f[i];
        for (int j = 0; j < m; ++j) a[(m - 1) * m + j] = 1.0;
        rhs[m - 1] = 0.0;
        const std::vector<double> delta = solve_linear(std::move(a), std::move(rhs), m);

        bool accepted = false;
        for (double lambda = 1.0; lambda >= 1.0 / 1024.0; lambda *= 0.5) {
            bool inside = true;
            for (int i = 0; i < m; ++i) {
                trial[i] = n[i] + lambda * delta[i];
                if (trial[i] < 0.0 || trial[i] > model.capacities[i]) {
                    inside = false;
                    break;
                }
            }
            if (!inside) continue;
            const double ft = field_norm(model, rates, trial, fp);
            if (ft < fn * (1.0 - 0.25 * lambda) || ft <= tol) {
                n = trial;
                fn = ft;
                f = fp;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    if (fn > tol)
        throw NoConvergence("equilibrium refinement stalled at field norm " + fmt(fn) +
                            ", target " + fmt(tol));
    return {std::move(n), fn, iter};
}

std::vector<double> project_to_level(std::vector<double> n, const std::vector<double>& c,
                                     double r) {
    const int m = static_cast<int>(n.size());
    for (int i = 0; i < m; ++i) n[i] = std::clamp(n[i], 0.0, c[i]);
    for (int pass = 0; pass < 64; ++pass) {
        const double gap = r - std::accumulate(n.begin(), n.end(), 0.0);
        if (std::abs(gap) <= 1e-12 * (1.0 + std::abs(r))) break;
        int slack = 0;
        for (int i = 0; i < m; ++i)
            if ((gap > 0.0 && n[i] < c[i]) || (gap < 0.0 && n[i] > 0.0)) ++slack;
        if (slack == 0) break;
        const double share = gap / slack;
        for (int i = 0; i < m; ++i) n[i] = std::clamp(n[i] + share, 0.0, c[i]);
    }
    return n;
}

EquilibriumResult locate(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                         double r, double tol, std::vector<double> start) {
    if (!(tol > 0.0)) throw BadParameter("tolerance must be positive");
    if (r == 0.0) return {std::vector<double>(model.m, 0.0), 0.0, 0};
    if (r == model.total_capacity) return {model.capacities, 0.0, 0};
    std::vector<double> f(model.m);
    const double f0 = field_norm(model, rates, start, f);
    const double pre_tol = std::max(1e3 * tol, 1e-6 * (1.0 + f0));
    double elapsed = 0.0;
    start = simulate_to_rest(model, rates, std::move(start), pre_tol, elapsed);
    return newton_polish(model, rates, std::move(start), tol);
}

void check_level(double r, double c) {
    if (!(r >= 0.0) || r > c)
        throw BadParameter("level " + fmt(r) + " outside [0, " + fmt(c) + "]");
}

struct SubModel {
    CompartmentalModel model;
    std::vector<RateSpec> rates;
    std::vector<int> to_parent;  // sub index -> parent index
};

SubModel restrict_to(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                     const std::vector<int>& keep) {
    SubModel sub;
    sub.to_parent = keep;
    std::vector<int> to_sub(model.m, -1);
    for (std::size_t i = 0; i < keep.size(); ++i) to_sub[keep[i]] = static_cast<int>(i);
    std::vector<std::pair<int, int>> edges;
    std::vector<double> caps;
    for (int v : keep) caps.push_back(model.capacities[v]);
    for (const auto& r : rates) {
        const int a = to_sub[r.edge.first], b = to_sub[r.edge.second];
        if (a < 0 || b < 0) continue;
        RateSpec rs = r;
        rs.edge = {a, b};
        sub.rates.push_back(std::move(rs));
        edges.emplace_back(a, b);
    }
    sub.model = build_model(static_cast<int>(keep.size()), edges, caps);
    return sub;
}

std::string index_set(const std::vector<int>& idx) {
    std::string s = "{";
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k) s += ",";
        s += std::to_string(idx[k] + 1);
    }
    return s + "}";
}

} // namespace

EquilibriumResult find_equilibrium(const CompartmentalModel& model,
                                   const std::vector<RateSpec>& rates, double r, double tol) {
    require_time_invariant(rates);
    check_level(r, model.total_capacity);
    if (!connectivity(model).strongly_connected)
        throw NotStronglyConnected("graph is not strongly connected; classify the limit instead");
    std::vector<double> start(model.m);
    for (int i = 0; i < model.m; ++i)
        start[i] = r * model.capacities[i] / model.total_capacity;
    return locate(model, rates, r, tol, std::move(start));
}

EquilibriumResult find_equilibrium(const CompartmentalModel& model,
                                   const std::vector<RateSpec>& rates, double r, double tol,
                                   const std::vector<double>& start) {
    require_time_invariant(rates);
    check_level(r, model.total_capacity);
    if (!connectivity(model).strongly_connected)
        throw NotStronglyConnected("graph is not strongly connected; classify the limit instead");
    if (static_cast<int>(start.size()) != model.m)
        throw BadParameter("start point has " + std::to_string(start.size()) +
                           " coordinates, expected " + std::to_string(model.m));
    const double lvl = std::accumulate(start.begin(), start.end(), 0.0);
    if (std::abs(lvl - r) > 1e-6 * (1.0 + std::abs(r)))
        throw LevelSetMismatch("start point lies on level " + fmt(lvl) + ", not " + fmt(r));
    return locate(model, rates, r, tol, start);
}

EquilibriumCurve equilibrium_curve(const CompartmentalModel& model,
                                   const std::vector<RateSpec>& rates,
                                   const std::vector<double>& r_grid, double tol) {
    if (r_grid.empty()) throw BadParameter("level grid is empty");
    for (std::size_t k = 0; k + 1 < r_grid.size(); ++k)
        if (!(r_grid[k] < r_grid[k + 1]))
            throw BadParameter("level grid must be strictly increasing");
    EquilibriumCurve curve;
    curve.r_grid = r_grid;
    for (std::size_t k = 0; k < r_grid.size(); ++k) {
        EquilibriumResult res =
            (k == 0 || r_grid[k] == 0.0 || r_grid[k] == model.total_capacity)
                ? find_equilibrium(model, rates, r_grid[k], tol)
                : find_equilibrium(model, rates, r_grid[k], tol,
                                   project_to_level(curve.points.back(), model.capacities,
                                                    r_grid[k]));
        curve.points.push_back(std::move(res.point));
        curve.residuals.push_back(res.residual);
    }
    curve.nondecreasing.assign(model.m, true);
    for (int i = 0; i < model.m; ++i)
        for (std::size_t k = 0; k + 1 < curve.points.size(); ++k)
            if (curve.points[k + 1][i] <
                curve.points[k][i] - 1e-7 * (1.0 + model.capacities[i]))
                curve.nondecreasing[i] = false;
    return curve;
}

NscClassification classify_nsc_limit(const CompartmentalModel& model,
                                     const std::vector<RateSpec>& rates,
                                     const std::vector<double>& n0) {
    require_time_invariant(rates);
    if (static_cast<int>(n0.size()) != model.m)
        throw BadParameter("initial condition has " + std::to_string(n0.size()) +
                           " coordinates, expected " + std::to_string(model.m));
    if (connectivity(model).strongly_connected)
        throw BadParameter("graph is strongly connected; the equilibrium is unique per level");

    const double r_total = std::accumulate(n0.begin(), n0.end(), 0.0);
    std::vector<double> f(model.m);
    const double f0 = field_norm(model, rates, n0, f);
    double elapsed = 0.0;
    std::vector<double> n = simulate_to_rest(model, rates, n0, 1e-9 * (1.0 + f0), elapsed);

    // confirmation window: thresholds must hold on a sustained stretch,
    // not just at the final instant
    const double window = std::max(0.1 * elapsed, 0.5);
    SimOptions wopts = rest_options(window);
    wopts.dense_output_stride = window / 32.0;
    const Trajectory conf = simulate_reduced(model, rates, n, wopts);

    std::vector<char> filled(model.m, 1), emptied(model.m, 1);
    for (const auto& row : conf.states)
        for (int i = 0; i < model.m; ++i) {
            const double thr = 1e-5 * std::max(model.capacities[i], 1.0);
            if (model.capacities[i] - row[i] > thr) filled[i] = 0;
            if (row[i] > thr) emptied[i] = 0;
        }
    NscClassification out;
    out.observed_limit = conf.states.back();

    // peel filled traps and emptied sources until nothing changes; labels are
    // recomputed on the shrinking subgraph so cascades resolve pass by pass
    std::vector<char> status(model.m, 0);  // 0 active, 'f' peeled full, 'e' peeled empty
    std::vector<int> peeled_full, peeled_empty;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<int> active;
        for (int i = 0; i < model.m; ++i)
            if (status[i] == 0) active.push_back(i);
        if (active.empty()) break;
        const SubModel sub = restrict_to(model, rates, active);
        const Connectivity conn = connectivity(sub.model);
        for (std::size_t ci = 0; ci < conn.condensation.components.size(); ++ci) {
            const auto& comp = conn.condensation.components[ci];
            const ComponentLabel lab = conn.condensation.labels[ci];
            bool all_full = true, all_empty = true;
            for (int v : comp) {
                all_full = all_full && filled[sub.to_parent[v]];
                all_empty = all_empty && emptied[sub.to_parent[v]];
            }
            const bool is_sink = lab == ComponentLabel::trap || lab == ComponentLabel::isolated;
            const bool is_source =
                lab == ComponentLabel::source || lab == ComponentLabel::isolated;
            if (is_sink && all_full) {
                for (int v : comp) {
                    status[sub.to_parent[v]] = 'f';
                    peeled_full.push_back(sub.to_parent[v]);
                }
                changed = true;
            } else if (is_source && all_empty) {
                for (int v : comp) {
                    status[sub.to_parent[v]] = 'e';
                    peeled_empty.push_back(sub.to_parent[v]);
                }
                changed = true;
            }
        }
    }
    std::sort(peeled_full.begin(), peeled_full.end());
    std::sort(peeled_empty.begin(), peeled_empty.end());
    std::vector<int> residual;
    for (int i = 0; i < model.m; ++i)
        if (status[i] == 0) residual.push_back(i);

    out.predicted_limit.assign(model.m, 0.0);
    for (int i : peeled_full) out.predicted_limit[i] = model.capacities[i];
    out.description = "filled traps " + index_set(peeled_full) + "; emptied sources " +
                      index_set(peeled_empty) + "; residual " + index_set(residual);

    if (!residual.empty()) {
        const SubModel sub = restrict_to(model, rates, residual);
        const Connectivity conn = connectivity(sub.model);
        const bool single = conn.condensation.components.size() == 1;
        if (!conn.weakly_reversible)
            out.description += "; residual is not weakly reversible, levels taken from the run";
        double full_mass = 0.0;
        for (int i : peeled_full) full_mass += model.capacities[i];
        for (const auto& comp : conn.condensation.components) {
            std::vector<int> parents;
            for (int v : comp) parents.push_back(sub.to_parent[v]);
            double level = 0.0;
            if (single) {
                level = r_total - full_mass;  // conservation pins the level
            } else {
                for (int p : parents) level += out.observed_limit[p];
                out.description += "; component " + index_set(parents) + " at observed level " +
                                   fmt(level);
            }
            if (comp.size() == 1) {
                out.predicted_limit[parents[0]] = level;
            } else {
                const SubModel piece = restrict_to(model, rates, parents);
                const EquilibriumResult eq = find_equilibrium(piece.model, piece.rates, level,
                                                              1e-10);
                for (std::size_t k = 0; k < parents.size(); ++k)
                    out.predicted_limit[parents[k]] = eq.point[k];
            }
        }
        if (single) out.description += "; residual level " + fmt(r_total - full_mass);
    }

    out.agreement = true;
    for (int i = 0; i < model.m; ++i)
        if (std::abs(out.predicted_limit[i] - out.observed_limit[i]) >
            1e-6 * (1.0 + model.capacities[i]))
            out.agreement = false;
    return out;
}

PeriodicOrbitEstimate entrainment_analysis(const CompartmentalModel& model,
                                           const std::vector<RateSpec>& rates,
                                           const std::vector<std::vector<double>>& ensemble,
                                           int n_periods) {
    if (ensemble.empty()) throw BadParameter("ensemble has no initial conditions");
    if (n_periods < 1) throw BadParameter("period count must be >= 1");
    for (const auto& ic : ensemble)
        if (static_cast<int>(ic.size()) != model.m)
            throw BadParameter("initial condition has " + std::to_string(ic.size()) +
                               " coordinates, expected " + std::to_string(model.m));
    const double r0 = std::accumulate(ensemble[0].begin(), ensemble[0].end(), 0.0);
    for (const auto& ic : ensemble) {
        const double r = std::accumulate(ic.begin(), ic.end(), 0.0);
        if (std::abs(r - r0) > 1e-9 * (1.0 + std::abs(r0)))
            throw LevelSetMismatch("initial conditions on levels " + fmt(r0) + " and " + fmt(r));
    }

    PeriodicOrbitEstimate est;
    std::vector<double> fundamentals;
    for (const auto& r : rates) {
        const auto p = r.k.period();
        if (!p) throw MixedPeriods("coefficient on edge " + edge_name(r.edge) + " is aperiodic");
        if (*p > 0.0) fundamentals.push_back(*p);
    }
    if (fundamentals.empty()) {
        est.period = 1.0;
        est.warnings.push_back(
            "all coefficients are constant; the orbit degenerates to a fixed point");
    } else {
        const double base = *std::max_element(fundamentals.begin(), fundamentals.end());
        for (int q = 1; q <= 32 && est.period == 0.0; ++q) {
            const double T = q * base;
            bool ok = true;
            for (double p : fundamentals) {
                const double ratio = T / p;
                if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) ok = false;
            }
            if (ok) est.period = T;
        }
        if (est.period == 0.0)
            throw MixedPeriods(
                "no common period within 32 multiples of the largest fundamental period");
    }
    for (const auto& r : rates)
        if (!r.psi.empty()) {
            est.warnings.push_back(
                "interaction denominators present; the monotonicity hypothesis is not checked");
            break;
        }

    const double T = est.period;
    const int per = 256;
    SimOptions opts;
    opts.rel_tol = 1e-10;
    opts.abs_tol = 1e-12;
    opts.t_end = n_periods * T;
    opts.dense_output_stride = T / per;

    std::vector<Trajectory> runs;
    runs.reserve(ensemble.size());
    for (const auto& ic : ensemble) runs.push_back(simulate_reduced(model, rates, ic, opts));
    const std::size_t rows = static_cast<std::size_t>(per) * n_periods + 1;
    for (const auto& tr : runs)
        if (tr.states.size() != rows)
            throw NumericError("dense output grid has " + std::to_string(tr.states.size()) +
                               " rows, expected " + std::to_string(rows));

    auto l1 = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (int i = 0; i < model.m; ++i) s += std::abs(a[i] - b[i]);
        return s;
    };
    for (int p = 0; p + 1 < n_periods; ++p) {
        double worst = 0.0;
        for (const auto& tr : runs) {
            double acc = 0.0;
            for (int k = 0; k <= per; ++k) {
                const std::size_t idx = static_cast<std::size_t>(p) * per + k;
                const double w = (k == 0 || k == per) ? 0.5 : 1.0;
                acc += w * l1(tr.states[idx], tr.states[idx + per]);
            }
            worst = std::max(worst, acc / per);  // time average over the period
        }
        est.l1_history.push_back(worst);
    }
    for (int p = 0; p < n_periods; ++p) {
        double worst = 0.0;
        for (std::size_t a = 0; a < runs.size(); ++a)
            for (std::size_t b = a + 1; b < runs.size(); ++b)
                for (int k = 0; k <= per; ++k) {
                    const std::size_t idx = static_cast<std::size_t>(p) * per + k;
                    worst = std::max(worst, l1(runs[a].states[idx], runs[b].states[idx]));
                }
        est.ic_spread_history.push_back(worst);
    }
    est.samples.reserve(per);
    for (int k = 0; k < per; ++k)
        est.samples.push_back(runs[0].states[static_cast<std::size_t>(n_periods - 1) * per + k]);
    return est;
}

} // namespace riboflow
