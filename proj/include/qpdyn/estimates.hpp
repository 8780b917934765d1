#pragma once

namespace qpdyn {

struct CavityQs {
    double q_in = 0.0;
    double q_out = 0.0;
    double q_w = 0.0;  // may be infinite
    double q_j = 0.0;

    // 1/Q_tot = 1/Q_in + 1/Q_out + 1/Q_j + 1/Q_w
    double q_tot() const;
};

void validate(const CavityQs& qs);

// P_j = 4 Delta^2 / (e^2 R_j), power dissipated in the junction at V = 2 Delta / e.
double junction_power(double r_j, double delta);

// P_in = P_j Q_in Q_j / (4 Q_tot^2)
double injection_power(double r_j, double delta, const CavityQs& qs);

double watts_to_dbm(double p);

// G = 4 Delta / (e^2 R_j), quasiparticles per second.
double qp_injection_rate(double r_j, double delta);

struct VortexMicro {
    double r_core = 0.0;  // R_c, m
    double tau_n = 0.0;   // s
};

// P = pi R_c^2 / tau_n
double microscopic_trapping_power(const VortexMicro& v);

struct ProfileValue {
    double ratio = 1.0;        // x / x0
    bool inside_core = true;   // false: value is the upper bound valid outside the core
    bool weak_trap = true;     // P / D <= 0.1, where first order in P/D is meaningful
};

// Density around a vortex, first order in P/D: 1 + (P / 4 pi D)(rho/R_c)^2 inside
// the core and at most 1 + (P / 2 pi D)(1/2 + ln(rho/R_c)) outside.
ProfileValue vortex_profile(double rho, double P, double D, double r_c);

// Ratio by which measured frequency shifts fall below theory in two devices.
inline constexpr double freqshift_empirical_factor = 1.7;

// delta_omega = -(Gamma / 2)[1 + pi sqrt(hbar omega / 2 Delta)] / empirical_factor
double frequency_shift(double gamma, double omega, double delta, double empirical_factor = 1.0);

// delta_omega / omega = -(x / 2)[(1/pi) sqrt(2 Delta / hbar omega) + 1] / empirical_factor
double frequency_shift_from_xqp(double x_qp, double omega, double delta, double empirical_factor = 1.0);

}  // namespace qpdyn
