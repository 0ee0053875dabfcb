#pragma once

#include <string>
#include <vector>

#include "riboflow/graph.hpp"
#include "riboflow/rates.hpp"
#include "riboflow/simulate.hpp"

namespace riboflow {

struct EquilibriumResult {
    std::vector<double> point;
    double residual = 0.0;  // max-norm of the reduced vector field at the point
    int newton_iterations = 0;
};

struct EquilibriumCurve {
    std::vector<double> r_grid;
    std::vector<std::vector<double>> points;  // row per grid value
    std::vector<double> residuals;
    std::vector<bool> nondecreasing;  // per coordinate, across the grid
};

struct NscClassification {
    std::vector<double> predicted_limit;
    std::vector<double> observed_limit;
    bool agreement = false;
    std::string description;  // which traps filled, which sources emptied, residual part
};

struct PeriodicOrbitEstimate {
    double period = 0.0;
    std::vector<std::vector<double>> samples;   // one period, 256 uniform phase rows
    std::vector<double> l1_history;             // time-averaged L1 gap between consecutive periods
    std::vector<double> ic_spread_history;      // per period, max pointwise L1 spread over IC pairs
    std::vector<std::string> warnings;
};

// Locate the equilibrium on the level set {sum n_i = r} of a strongly connected
// time-invariant model: simulate from the proportional initial condition
// n_i(0) = r c_i / c until the vector field is small, then polish with damped
// Newton restricted to the level hyperplane (central-difference Jacobian).
EquilibriumResult find_equilibrium(const CompartmentalModel& model,
                                   const std::vector<RateSpec>& rates, double r,
                                   double tol = 1e-9);

// Same, but the search starts from a caller-supplied point on the level set.
EquilibriumResult find_equilibrium(const CompartmentalModel& model,
                                   const std::vector<RateSpec>& rates, double r, double tol,
                                   const std::vector<double>& start);

EquilibriumCurve equilibrium_curve(const CompartmentalModel& model,
                                   const std::vector<RateSpec>& rates,
                                   const std::vector<double>& r_grid, double tol = 1e-9);

// Long-time limit of a model that is not strongly connected: simulate, detect
// filled traps and emptied sources, peel them, and predict the residual
// weakly reversible part by equilibrium location at the leftover level.
NscClassification classify_nsc_limit(const CompartmentalModel& model,
                                     const std::vector<RateSpec>& rates,
                                     const std::vector<double>& n0);

// Integrate an ensemble of initial conditions on one level set under common-
// period forcing; report per-period periodicity and spread residuals and the
// final period as the periodic-orbit estimate.
PeriodicOrbitEstimate entrainment_analysis(const CompartmentalModel& model,
                                           const std::vector<RateSpec>& rates,
                                           const std::vector<std::vector<double>>& ensemble,
                                           int n_periods);

} // namespace riboflow
