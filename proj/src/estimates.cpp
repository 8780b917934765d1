#include "qpdyn/estimates.hpp"

#include <cmath>
#include <numbers>

#include "qpdyn/constants.hpp"
#include "qpdyn/errors.hpp"

namespace qpdyn {

double CavityQs::q_tot() const {
    validate(*this);
    return 1.0 / (1.0 / q_in + 1.0 / q_out + 1.0 / q_j + 1.0 / q_w);
}

void validate(const CavityQs& qs) {
    if (!(qs.q_in > 0.0) || !(qs.q_out > 0.0) || !(qs.q_w > 0.0) || !(qs.q_j > 0.0))
        throw InvalidParameterError("all quality factors must be positive");
}

double junction_power(double r_j, double delta) {
    if (!(r_j > 0.0)) throw InvalidParameterError("junction resistance must be positive");
    if (!(delta >= 0.0)) throw InvalidParameterError("gap must be >= 0");
    const double e = codata.e_charge;
    return 4.0 * delta * delta / (e * e * r_j);
}

double injection_power(double r_j, double delta, const CavityQs& qs) {
    const double qt = qs.q_tot();
    return junction_power(r_j, delta) * qs.q_in * qs.q_j / (4.0 * qt * qt);
}

double watts_to_dbm(double p) {
    if (!(p > 0.0)) throw InvalidParameterError("power must be positive for dBm");
    return 10.0 * std::log10(p / 1e-3);
}

double qp_injection_rate(double r_j, double delta) {
    if (!(r_j > 0.0)) throw InvalidParameterError("junction resistance must be positive");
    if (!(delta >= 0.0)) throw InvalidParameterError("gap must be >= 0");
    const double e = codata.e_charge;
    return 4.0 * delta / (e * e * r_j);
}

double microscopic_trapping_power(const VortexMicro& v) {
    if (!(v.r_core > 0.0) || !(v.tau_n > 0.0)) throw InvalidParameterError("core radius and tau_n must be positive");
    return std::numbers::pi * v.r_core * v.r_core / v.tau_n;
}

ProfileValue vortex_profile(double rho, double P, double D, double r_c) {
    if (!(rho >= 0.0)) throw DomainError("rho must be >= 0");
    if (!(P >= 0.0) || !(D > 0.0) || !(r_c > 0.0)) throw InvalidParameterError("need P >= 0, D > 0, r_c > 0");
    ProfileValue v;
    const double pd = P / D;
    v.weak_trap = pd <= 0.1;
    const double u = rho / r_c;
    if (u <= 1.0) {
        v.inside_core = true;
        v.ratio = 1.0 + pd / (4.0 * std::numbers::pi) * u * u;
    } else {
        v.inside_core = false;
        v.ratio = 1.0 + pd / (2.0 * std::numbers::pi) * (0.5 + std::log(u));
    }
    return v;
}

double frequency_shift(double gamma, double omega, double delta, double empirical_factor) {
    if (!(gamma >= 0.0)) throw DomainError("gamma must be >= 0");
    if (!(omega > 0.0) || !(delta > 0.0)) throw InvalidParameterError("omega and delta must be positive");
    if (!(empirical_factor > 0.0)) throw InvalidParameterError("empirical factor must be positive");
    const double k = std::sqrt(codata.hbar * omega / (2.0 * delta));
    return -0.5 * gamma * (1.0 + std::numbers::pi * k) / empirical_factor;
}

double frequency_shift_from_xqp(double x_qp, double omega, double delta, double empirical_factor) {
    if (!(x_qp >= 0.0 && x_qp <= 1.0)) throw DomainError("x_qp must lie in [0, 1]");
    if (!(omega > 0.0) || !(delta > 0.0)) throw InvalidParameterError("omega and delta must be positive");
    if (!(empirical_factor > 0.0)) throw InvalidParameterError("empirical factor must be positive");
    const double k = std::sqrt(2.0 * delta / (codata.hbar * omega));
    return -0.5 * omega * x_qp * (k / std::numbers::pi + 1.0) / empirical_factor;
}

}  // namespace qpdyn
