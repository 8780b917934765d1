#pragma once

#include <optional>

namespace qpdyn {

struct PhysicalConstants {
    double hbar = 1.054571817e-34;     // J s
    double e_charge = 1.602176634e-19;  // C
    double k_B = 1.380649e-23;          // J/K
};

inline constexpr PhysicalConstants codata{};

struct QubitParams {
    double omega_q = 0.0;     // rad/s
    double delta_gap = 0.0;   // J
    std::optional<double> t_c;  // K
};

// 2*pi*6 GHz and a 180 ueV aluminium gap.
QubitParams default_qubit();

void validate(const QubitParams& q);

// C = sqrt(2 omega Delta / (pi^2 hbar)), the decay rate per unit x_qp.
double qp_coupling_constant(const QubitParams& q);

// Gamma from the normalized density, evaluated from Gamma/omega = x (1/pi) sqrt(2 Delta / hbar omega).
double gamma_from_xqp(double x_qp, const QubitParams& q);

// Delta / (k_B T_c) for which 4 (Delta/k_B T_c)^3 = 21.8.
double canonical_gap_ratio();

}  // namespace qpdyn
