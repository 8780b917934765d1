#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpdyn/errors.hpp"

namespace qpdyn {

struct TraceSample {
    double t = 0.0;      // s
    double gamma = 0.0;  // 1/s
    std::optional<double> sigma;
};

struct DecayTrace {
    std::vector<TraceSample> samples;
    std::string label;

    // Throws ParseError naming the offending sample (1-based) on failure.
    void validate() const;
    bool has_sigma() const;
};

// Gamma(t) = A (1 - r') / (exp(t/tau_ss) - r') + Gamma0, A = C x_i.
struct FitParams {
    double amplitude = 0.0;  // 1/s
    double r_prime = 0.0;
    double tau_ss = 0.0;  // s
    double gamma0 = 0.0;  // 1/s
};

enum class Weighting { relative, absolute, sigma };

std::string_view weighting_name(Weighting w);
Weighting parse_weighting(std::string_view s);

struct FitResult : FitParams {
    // Row-major, in the order (amplitude, r_prime, tau_ss, gamma0).
    std::array<double, 16> covariance{};
    double residual_norm = 0.0;  // sqrt of the weighted sum of squares
    int n_used = 0;
    double t_min_applied = 0.0;
    int iterations = 0;
    Weighting weighting = Weighting::relative;
    std::vector<std::string> warnings;
    std::vector<double> cost_history;  // objective after each accepted step

    double sigma(int i) const;
};

double gamma_model(double t, const FitParams& f);

struct FitOptions {
    double t_min = 200e-6;
    Weighting weighting = Weighting::relative;
    std::optional<FitParams> guess;
    int max_iterations = 500;
};

// Best-so-far state attached to a failed fit.
struct NonConvergenceError : NumericalError {
    NonConvergenceError(const std::string& w, FitParams best_params, double best_residual)
        : NumericalError(w), best(best_params), residual_norm(best_residual) {}
    FitParams best;
    double residual_norm;
};

FitResult fit_gamma_trace(const DecayTrace& trace, const FitOptions& opt = {});

// Default starting point used when FitOptions::guess is empty.
FitParams initial_guess(const DecayTrace& trace, double t_min);

// Rates implied by a fit. x0 is only bounded, 0 <= x0 <= x0_max, so s and g are
// reported as ranges taken at the two ends of that interval.
struct ExtractedRates {
    double C = 0.0;
    double x_i = 0.0, sigma_x_i = 0.0;
    double r = 0.0, sigma_r = 0.0;
    double x0_max = 0.0;     // min(Gamma0 / C, largest x0 keeping s >= 0)
    bool x0_capped = false;  // true when the s >= 0 limit is tighter than Gamma0 / C
    double s_min = 0.0, sigma_s_min = 0.0;
    double s_max = 0.0, sigma_s_max = 0.0;
    double g_min = 0.0;
    double g_max = 0.0, sigma_g_max = 0.0;  // g at x0 = x0_max
    double g_bound = 0.0;                   // 1 / (4 r tau_ss^2), or x0_max / tau_ss when r' = 0

    bool r_in_band(double r_true, double k) const;
    bool s_in_band(double s_true, double k) const;
};

ExtractedRates extract_rates(const FitResult& f, double C);

struct SteadyStatePoint {
    double tau_ss = 0.0;  // s
    double inv_t1 = 0.0;  // 1/s
    std::optional<double> sigma_inv_t1;
};

struct T1Fit {
    double g = 0.0, sigma_g = 0.0;
    double gamma_ex = 0.0, sigma_gamma_ex = 0.0;
    double slope = 0.0;  // C g
    double covariance_slope_intercept = 0.0;
    double chi2 = 0.0;
    int n = 0;
};

// 1/T1 = C g tau_ss + Gamma_ex by weighted linear regression.
T1Fit fit_t1_vs_tau(std::span<const SteadyStatePoint> points, double C);

DecayTrace synth_trace(const FitParams& f, std::span<const double> t_grid, double noise_rel, std::uint64_t seed);

std::vector<double> log_grid(double t0, double t1, int n);
std::vector<double> lin_grid(double t0, double t1, int n);

}  // namespace qpdyn
