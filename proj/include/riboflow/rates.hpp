#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riboflow/graph.hpp"

namespace riboflow {

// Monotone transform applied to a single coordinate: theta(0)=0, nondecreasing
// on [0,inf).  hill_general(l,p,q) is r^p/(l+r^q) with p >= q >= 0, p > 0,
// which covers the saturating numerator/denominator mismatch kinetics
// (p=3, q=2) as well as fractional exponents such as (1.5, 0.5).
struct Transform {
    enum class Kind { identity, power, monod, hill_ratio, power_over_shifted_power, hill_general };

    Kind kind = Kind::identity;
    double l = 0.0;  // shift parameter, > 0 where used
    double a = 0.0;  // exponent (power, power_over_shifted_power numerator, hill_general numerator)
    double b = 0.0;  // power_over_shifted_power denominator / hill_general denominator exponent
    double L = 0.0;  // hill_ratio exponent

    double operator()(double r) const;
    // log of the transform value; returns -inf at r = 0
    double log_value(double r) const;
    // theta_hat with theta(r) = theta_hat(r) * r, finite on [0, inf)
    double theta_hat(double r) const;
    bool strictly_increasing() const;

    static Transform identity();
    static Transform power(double a);
    static Transform monod(double l);
    static Transform hill_ratio(double l, double L);
    static Transform power_over_shifted_power(double l, double a, double b);
    static Transform hill_general(double l, double p, double q);
};

// Piecewise locally Lipschitz time coefficient with closed-form bounds.
//   constant:  kbar
//   decaying:  kbar * (1 + amplitude * exp(-rate * t))
//   sinusoid:  kbar * (offset + amplitude * cos(frequency * t + phase))
//   piecewise: value of segment whose [t_break, next) window contains t,
//              children evaluated at absolute time
struct TimeCoefficient {
    enum class Kind { constant, decaying, sinusoid, piecewise };

    Kind kind = Kind::constant;
    double kbar = 0.0;
    double amplitude = 0.0, rate = 0.0;            // decaying
    double offset = 0.0, frequency = 0.0, phase = 0.0;  // sinusoid
    std::vector<std::pair<double, TimeCoefficient>> segments;  // piecewise, t_breaks increasing

    double operator()(double t) const;
    double lower_bound() const;  // inf_t k(t), > 0 by construction
    double upper_bound() const;  // sup_t k(t), finite by construction
    // fundamental period: 0 for constants (compatible with any period),
    // nullopt for aperiodic kinds (decaying, piecewise)
    std::optional<double> period() const;
    std::vector<double> breakpoints() const;  // mandatory integrator step boundaries

    static TimeCoefficient constant(double kbar);
    static TimeCoefficient decaying(double kbar, double amplitude, double rate);
    static TimeCoefficient sinusoid(double kbar, double offset, double amplitude, double frequency,
                                    double phase);
    static TimeCoefficient piecewise(std::vector<std::pair<double, TimeCoefficient>> segments);
};

// Psi denominator polynomial: sum of alpha * prod_l n_l^{r1_l} * s_l^{r2_l}
// with nonnegative alpha, so Psi >= 0 on the nonnegative orthant.  The
// standard saturating constructions put identity transforms under these
// monomials, so evaluation is over the raw state coordinates.
struct DenominatorPoly {
    struct Term {
        double alpha = 0.0;
        std::vector<int> r1;  // exponents over n
        std::vector<int> r2;  // exponents over s
    };
    std::vector<Term> terms;  // empty list is Psi == 0

    bool empty() const { return terms.empty(); }
    double operator()(const std::vector<double>& n, const std::vector<double>& s) const;
};

// One transition rate K_ij(n,s,t) = k(t) * theta(n_i) * nu(s_j) / (1 + Psi(n,s)).
struct RateSpec {
    std::pair<int, int> edge{-1, -1};  // (i, j), 0-based
    TimeCoefficient k;
    Transform theta;  // applied to n_i
    Transform nu;     // applied to s_j
    DenominatorPoly psi;
};

double eval_rate(const RateSpec& spec, const std::vector<double>& n, const std::vector<double>& s,
                 double t);

// Time-invariant envelopes with K_lower <= K(.,.,t) <= K_upper on the
// capacity box: K_lower = k_inf/(1+Psi(c,c)) theta nu, K_upper = k_sup theta nu.
struct RateEnvelope {
    double lower_coefficient = 0.0;
    double upper_coefficient = 0.0;
    Transform theta, nu;

    double lower(double n_i, double s_j) const { return lower_coefficient * theta(n_i) * nu(s_j); }
    double upper(double n_i, double s_j) const { return upper_coefficient * theta(n_i) * nu(s_j); }
};

RateEnvelope rate_envelope(const RateSpec& spec, const std::vector<double>& capacities);

// Named kinetics constructors (edge must be assigned by the caller):
//   mass_action:   theta = nu = identity, Psi = 0
//   monod(l):      theta = nu = r/(l+r)
//   hill(l,L):     theta = nu = r^L/(l+r^L)
//   modified_hill(l): theta = nu = r^3/(l+r^2)
RateSpec make_mass_action(TimeCoefficient k);
RateSpec make_monod(double l, TimeCoefficient k);
RateSpec make_hill(double l, double L, TimeCoefficient k);
RateSpec make_modified_hill(double l, TimeCoefficient k);

// Factored coefficient k~(t) = k(t) nu(c_j - n_j) / (1 + Psi(n, c-n)) with
// eval_rate == k~ * theta(n_i) exactly.
double factor_general(const RateSpec& spec, const std::vector<double>& n, double t,
                      const std::vector<double>& capacities);

// Quasi-linear coefficient k^(t) = k(t) theta_hat(n_i) nu(c_j - n_j) / (1 + Psi)
// with eval_rate == k^ * n_i exactly.
double factor_quasi_ltv(const RateSpec& spec, const std::vector<double>& n, double t,
                        const std::vector<double>& capacities);

} // namespace riboflow
