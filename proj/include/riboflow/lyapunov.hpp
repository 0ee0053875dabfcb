#pragma once

#include <vector>

#include "riboflow/rates.hpp"
#include "riboflow/simulate.hpp"

namespace riboflow {

// Entropy-like Lyapunov family induced by rate factorizations.  Every member
// is Sum_i w_i * V_i(n_i, nbar_i) with V_i determined by the kind:
//   ltv               n log(n/nb) + nb - n
//   general_integral  int_nb^n (log theta_i(r) - log theta_i(nb)) dr
//   lab               (a-b)(nb-n) + a n log(n/nb) + b(l+n) log((l+nb)/(l+n))
//   hill_32           generator theta(r) = r^3/(l+r^2)
//   hill_22           generator theta(r) = r^2/(l+r^2)
//   hill_1505         generator theta(r) = r^1.5/(l+r^0.5)
struct LyapunovSpec {
    enum class Kind { ltv, general_integral, lab, hill_32, hill_22, hill_1505 };

    Kind kind = Kind::ltv;
    double l = 0.0;                 // lab and hill variants
    std::vector<double> a, b;       // lab: a_i > 0, 0 <= b_i <= a_i
    std::vector<Transform> thetas;  // general_integral: one per compartment
    std::vector<double> weights;    // optional positive a^_i, empty = all 1
};

double v_ltv(const std::vector<double>& n, const std::vector<double>& nbar);

double v_general(const std::vector<Transform>& thetas, const std::vector<double>& n,
                 const std::vector<double>& nbar);

double v_lab(double l, const std::vector<double>& a, const std::vector<double>& b,
             const std::vector<double>& n, const std::vector<double>& nbar);

enum class HillVariant { hill_32, hill_22, hill_1505 };

double v_hill(HillVariant variant, double l, const std::vector<double>& n,
              const std::vector<double>& nbar);

// Dispatch on spec.kind with weights applied.
double lyapunov_value(const LyapunovSpec& spec, const std::vector<double>& n,
                      const std::vector<double>& nbar);

// Per-compartment gradient dV/dn_i = w_i (log theta_V,i(n_i) - log theta_V,i(nbar_i));
// -inf on the n_i = 0 boundary for kinds whose generator vanishes there.
std::vector<double> lyapunov_gradient(const LyapunovSpec& spec, const std::vector<double>& n,
                                      const std::vector<double>& nbar);

struct LyapunovProfile {
    std::vector<double> values;
    std::vector<double> derivative_estimates;
};

// V at every sample plus dV/dt by finite differences: fourth-order five-point
// stencils (one-sided at the ends) on uniform grids, three-point otherwise.
// For full trajectories the n-part is used.
LyapunovProfile lyapunov_profile(const Trajectory& traj, const LyapunovSpec& spec,
                                 const std::vector<double>& nbar);

// Chain-rule cross-check dV/dt = grad V . f at every sample, evaluated from
// the rate specs; independent of the finite-difference estimates.
std::vector<double> lyapunov_chain_rule(const Trajectory& traj, const LyapunovSpec& spec,
                                        const std::vector<double>& nbar,
                                        const CompartmentalModel& model,
                                        const std::vector<RateSpec>& rates);

} // namespace riboflow
