#pragma once

#include <span>
#include <string>
#include <vector>

namespace qpdyn {

// dx/dt = -r x^2 - s x + g
struct RateParams {
    double r = 0.0;  // 1/s
    double s = 0.0;  // 1/s
    double g = 0.0;  // 1/s
};

// x(t) = x_i (1 - r') / (exp(t/tau_ss) - r') + x0
struct SolutionParams {
    double x_i = 0.0;
    double r_prime = 0.0;
    double tau_ss = 0.0;  // s
    double x0 = 0.0;
};

struct SteadyState {
    double x0 = 0.0;
    double tau_ss = 0.0;  // s; infinite for pure recombination
    double r_tau = 0.0;   // r * tau_ss

    // Shape parameter for a decay starting x_i above x0: r tau x_i / (1 + r tau x_i).
    double r_prime(double x_i) const;
};

// Largest r' used when a fit lands on or marginally past 1.
inline constexpr double r_prime_max = 1.0 - 1e-12;

void validate(const RateParams& rp);
void validate(const SolutionParams& p);

double xqp_analytic(double t, const SolutionParams& p);

// s = g = 0: x_init / (1 + r x_init t).
double xqp_pure_recombination(double t, double r, double x_init);

// Closed-form x(t) from the rates, choosing the exponential, hyperbolic or
// constant branch as appropriate.
double xqp_from_rates(double t, const RateParams& rp, double x_init);

SteadyState steady_state(const RateParams& rp);

// Shape parameters of the decay from x_i + x0. Fails for pure recombination,
// which has no finite tau_ss.
SolutionParams solution_from_rates(const RateParams& rp, double x_i);

RateParams rates_from_solution(const SolutionParams& p);

struct ExtractionBounds {
    double s_min = 0.0;
    double s_max = 0.0;
    double g_max = 0.0;
};

ExtractionBounds extraction_bounds(const SolutionParams& p, double gamma0, double C);

// Clamps r' >= 1 (within 1e-6) down to r_prime_max and records a warning.
// Values further above 1 are rejected.
double clamp_r_prime(double r_prime, std::vector<std::string>* warnings);

struct OdeOptions {
    double rtol = 1e-11;
    double atol_scale = 1e-14;  // absolute tolerance relative to max(x_init, x0)
};

// Adaptive Dormand-Prince integration of the rate equation, sampled at t_grid.
// The first grid point is the initial time.
std::vector<double> integrate_ode(const RateParams& rp, double x_init, std::span<const double> t_grid,
                                  const OdeOptions& opt = {});

// r = 4 (Delta / k_B T_c)^3 / (F tau0)
double recombination_theory(double F, double tau0, double delta, double t_c);

// Same with the canonical prefactor 21.8.
double recombination_theory(double F, double tau0);

}  // namespace qpdyn
