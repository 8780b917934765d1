#include "qpdyn/constants.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qpdyn/errors.hpp"
#include "qpdyn/units.hpp"

namespace qpdyn {

QubitParams default_qubit() {
    return QubitParams{2.0 * std::numbers::pi * 6e9, 180.0 * units::ueV, std::nullopt};
}

void validate(const QubitParams& q) {
    if (!(q.omega_q > 0.0) || !std::isfinite(q.omega_q))
        throw InvalidParameterError("omega_q must be positive, got " + std::to_string(q.omega_q));
    if (!(q.delta_gap > 0.0) || !std::isfinite(q.delta_gap))
        throw InvalidParameterError("delta_gap must be positive, got " + std::to_string(q.delta_gap));
    if (!(codata.hbar * q.omega_q < 2.0 * q.delta_gap))
        throw InvalidParameterError("qubit energy hbar*omega_q must lie below the pair-breaking threshold 2*Delta");
    if (q.t_c && !(*q.t_c > 0.0)) throw InvalidParameterError("t_c must be positive");
}

double qp_coupling_constant(const QubitParams& q) {
    validate(q);
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    return std::sqrt(2.0 * q.omega_q * q.delta_gap / (pi2 * codata.hbar));
}

double gamma_from_xqp(double x_qp, const QubitParams& q) {
    validate(q);
    if (!(x_qp >= 0.0 && x_qp <= 1.0))
        throw DomainError("x_qp must lie in [0, 1], got " + std::to_string(x_qp));
    return q.omega_q * x_qp * std::sqrt(2.0 * q.delta_gap / (codata.hbar * q.omega_q)) / std::numbers::pi;
}

double canonical_gap_ratio() { return std::cbrt(21.8 / 4.0); }

}  // namespace qpdyn
