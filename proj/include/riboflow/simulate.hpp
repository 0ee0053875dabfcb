#pragma once

#include <vector>

#include "riboflow/graph.hpp"
#include "riboflow/rates.hpp"

namespace riboflow {

struct Trajectory {
    std::vector<double> times;                 // strictly increasing
    std::vector<std::vector<double>> states;   // one row per time, m or 2m columns
    std::vector<double> capacities;
    double level = 0.0;                        // sum of n(0)
    bool full = false;                         // rows are [n_1..n_m, s_1..s_m]
    int m = 0;
};

enum class Method { adaptive_rk45, fixed_rk4 };

struct SimOptions {
    Method method = Method::adaptive_rk45;
    double rel_tol = 1e-9;
    double abs_tol = 1e-11;
    double max_step = 0.0;              // 0: no cap
    double t_end = 1.0;                 // >= 0; 0 emits the initial row only
    double dense_output_stride = 0.01;
};

// dn = reduced vector field at (t, n), with s = c - n; coordinates are
// clamped into the capacity box for rate evaluation only, so the output
// always sums to zero exactly.
void reduced_vector_field(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                          double t, const std::vector<double>& n, std::vector<double>& dn);

Trajectory simulate_reduced(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                            const std::vector<double>& n0, const SimOptions& opts);

Trajectory simulate_full(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                         const std::vector<double>& n0, const std::vector<double>& s0,
                         const SimOptions& opts);

struct ConservationReport {
    double max_total_drift = 0.0;           // relative drift of sum n_i (+ s_i)
    double max_percompartment_drift = 0.0;  // full runs: relative drift of n_i + s_i; 0 for reduced
};

ConservationReport conservation_report(const Trajectory& traj);

// min over samples with t >= tau and all i of min(n_i, c_i - n_i) (reduced)
// or min(n_i, s_i) (full).  Degenerate level sets (empty or saturated
// network) report 0.
double persistence_margin(const Trajectory& traj, double tau);

} // namespace riboflow
