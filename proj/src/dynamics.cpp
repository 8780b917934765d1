#include "qpdyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "qpdyn/constants.hpp"
#include "qpdyn/errors.hpp"

namespace qpdyn {

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}
}  // namespace

double SteadyState::r_prime(double x_i) const {
    if (std::isinf(tau_ss)) return 1.0;
    const double a = r_tau * x_i;
    return a / (1.0 + a);
}

void validate(const RateParams& rp) {
    if (!(rp.r >= 0.0) || !(rp.s >= 0.0) || !(rp.g >= 0.0) || !std::isfinite(rp.r) || !std::isfinite(rp.s) ||
        !std::isfinite(rp.g))
        throw InvalidParameterError("rates must be finite and non-negative (r=" + num(rp.r) + ", s=" + num(rp.s) +
                                    ", g=" + num(rp.g) + ")");
}

void validate(const SolutionParams& p) {
    if (!(p.x_i >= 0.0) || !std::isfinite(p.x_i)) throw InvalidParameterError("x_i must be >= 0");
    if (!(p.r_prime >= 0.0 && p.r_prime < 1.0))
        throw InvalidParameterError("r_prime must lie in [0, 1), got " + num(p.r_prime));
    if (!(p.tau_ss > 0.0) || !std::isfinite(p.tau_ss))
        throw InvalidParameterError("tau_ss must be positive and finite, got " + num(p.tau_ss));
    if (!(p.x0 >= 0.0) || !std::isfinite(p.x0)) throw InvalidParameterError("x0 must be >= 0");
}

double xqp_analytic(double t, const SolutionParams& p) {
    validate(p);
    if (!(t >= 0.0)) throw DomainError("t must be >= 0");
    const double one_m = 1.0 - p.r_prime;
    return p.x_i * one_m / (std::expm1(t / p.tau_ss) + one_m) + p.x0;
}

double xqp_pure_recombination(double t, double r, double x_init) {
    if (!(t >= 0.0)) throw DomainError("t must be >= 0");
    return x_init / (1.0 + r * x_init * t);
}

double xqp_from_rates(double t, const RateParams& rp, double x_init) {
    validate(rp);
    if (rp.r == 0.0 && rp.s == 0.0) return x_init + rp.g * t;
    if (rp.s == 0.0 && rp.g == 0.0) return xqp_pure_recombination(t, rp.r, x_init);
    const SteadyState st = steady_state(rp);
    const double y0 = x_init - st.x0;
    // y' = -r y^2 - y / tau holds for either sign of y0.
    const double e = std::exp(-t / st.tau_ss);
    return st.x0 + y0 * e / (1.0 + st.r_tau * y0 * (-std::expm1(-t / st.tau_ss)));
}

SteadyState steady_state(const RateParams& rp) {
    validate(rp);
    const double r = rp.r, s = rp.s, g = rp.g;
    if (r == 0.0 && s == 0.0) throw DegenerateSystemError("r = s = 0: no decay channel, no steady state");
    SteadyState st;
    if (r == 0.0) {
        st.x0 = g / s;
        st.tau_ss = 1.0 / s;
        st.r_tau = 0.0;
        return st;
    }
    if (s == 0.0) {
        st.x0 = std::sqrt(g / r);
        if (st.x0 == 0.0) {
            st.tau_ss = inf;
            st.r_tau = inf;
        } else {
            st.tau_ss = 1.0 / (2.0 * r * st.x0);
            st.r_tau = r * st.tau_ss;
        }
        return st;
    }
    // Root of r x^2 + s x - g written without cancellation.
    st.x0 = 2.0 * g / (std::sqrt(s * s + 4.0 * g * r) + s);
    st.tau_ss = 1.0 / (2.0 * r * st.x0 + s);
    st.r_tau = r * st.tau_ss;
    return st;
}

SolutionParams solution_from_rates(const RateParams& rp, double x_i) {
    if (!(x_i >= 0.0)) throw InvalidParameterError("x_i must be >= 0");
    const SteadyState st = steady_state(rp);
    if (std::isinf(st.tau_ss))
        throw DegenerateSystemError("pure recombination (s = g = 0) has no finite tau_ss; use xqp_pure_recombination");
    return SolutionParams{x_i, st.r_prime(x_i), st.tau_ss, st.x0};
}

RateParams rates_from_solution(const SolutionParams& p) {
    validate(p);
    if (!(p.x_i > 0.0)) throw InvalidParameterError("x_i must be positive to extract rates");
    const double tau = p.tau_ss;
    RateParams out;
    out.r = p.r_prime / ((1.0 - p.r_prime) * tau * p.x_i);
    double s = 1.0 / tau - 2.0 * out.r * p.x0;
    double g = p.x0 / tau - out.r * p.x0 * p.x0;
    if (s < 0.0) {
        if (s < -1e-12 / tau) throw NegativeRateError("s", s);
        s = 0.0;
    }
    if (g < 0.0) {
        if (g < -1e-12 * p.x0 / tau) throw NegativeRateError("g", g);
        g = 0.0;
    }
    out.s = s;
    out.g = g;
    return out;
}

ExtractionBounds extraction_bounds(const SolutionParams& p, double gamma0, double C) {
    validate(p);
    if (!(gamma0 >= 0.0)) throw InvalidParameterError("gamma0 must be >= 0");
    if (!(C > 0.0)) throw InvalidParameterError("C must be positive");
    ExtractionBounds b;
    b.s_max = 1.0 / p.tau_ss;
    if (p.r_prime == 0.0) {
        b.s_min = b.s_max;
        b.g_max = p.x0 / p.tau_ss;
        return b;
    }
    if (!(p.x_i > 0.0)) throw InvalidParameterError("x_i must be positive when r_prime > 0");
    const double one_m = 1.0 - p.r_prime;
    b.s_min = std::max(0.0, (1.0 - 2.0 * p.r_prime * gamma0 / (one_m * p.x_i * C)) / p.tau_ss);
    b.g_max = one_m * p.x_i / (4.0 * p.r_prime * p.tau_ss);
    return b;
}

double clamp_r_prime(double r_prime, std::vector<std::string>* warnings) {
    if (std::isnan(r_prime)) throw DomainError("r_prime is NaN");
    if (r_prime < 0.0) {
        if (r_prime > -1e-12) return 0.0;
        throw DomainError("r_prime must be >= 0, got " + num(r_prime));
    }
    if (r_prime <= r_prime_max) return r_prime;
    if (r_prime > 1.0 + 1e-6) throw DomainError("r_prime must be < 1, got " + num(r_prime));
    if (warnings) warnings->push_back("r_prime " + num(r_prime) + " clamped to 1 - 1e-12");
    return r_prime_max;
}

std::vector<double> integrate_ode(const RateParams& rp, double x_init, std::span<const double> t_grid,
                                  const OdeOptions& opt) {
    namespace odeint = boost::numeric::odeint;
    validate(rp);
    if (!(x_init >= 0.0)) throw InvalidParameterError("x_init must be >= 0");
    if (t_grid.empty()) return {};
    if (!(t_grid.front() >= 0.0)) throw InvalidParameterError("t_grid must start at t >= 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw InvalidParameterError("t_grid must be strictly increasing");

    double scale = x_init;
    if (rp.r > 0.0 || rp.s > 0.0) scale = std::max(scale, steady_state(rp).x0);
    const double atol = std::max(opt.atol_scale * scale, std::numeric_limits<double>::min());

    using state = std::vector<double>;
    auto rhs = [&](const state& x, state& dx, double) { dx[0] = -rp.r * x[0] * x[0] - rp.s * x[0] + rp.g; };

    std::vector<double> out;
    out.reserve(t_grid.size());
    auto obs = [&](const state& x, double) { out.push_back(std::max(0.0, x[0])); };

    state x{x_init};
    const double span = t_grid.back() - t_grid.front();
    double dt = span > 0.0 ? span * 1e-6 : 1e-12;
    // Initial step no larger than a small fraction of the fastest local time scale.
    const double rate0 = rp.r * x_init + rp.s;
    if (rate0 > 0.0) dt = std::min(dt, 1e-3 / rate0);
    try {
        auto stepper = odeint::make_dense_output(atol, opt.rtol, odeint::runge_kutta_dopri5<state>());
        odeint::integrate_times(stepper, rhs, x, t_grid.begin(), t_grid.end(), dt, obs,
                                odeint::max_step_checker(1'000'000));
    } catch (const odeint::odeint_error& e) {
        throw StepUnderflowError(std::string("ODE integration failed: ") + e.what());
    }
    if (out.size() != t_grid.size()) throw StepUnderflowError("ODE integration stopped early");
    return out;
}

double recombination_theory(double F, double tau0, double delta, double t_c) {
    if (!(F >= 1.0)) throw InvalidParameterError("phonon trapping factor F must be >= 1");
    if (!(tau0 > 0.0)) throw InvalidParameterError("tau0 must be positive");
    if (!(delta > 0.0) || !(t_c > 0.0)) throw InvalidParameterError("delta and t_c must be positive");
    const double ratio = delta / (codata.k_B * t_c);
    return 4.0 * ratio * ratio * ratio / (F * tau0);
}

double recombination_theory(double F, double tau0) {
    if (!(F >= 1.0)) throw InvalidParameterError("phonon trapping factor F must be >= 1");
    if (!(tau0 > 0.0)) throw InvalidParameterError("tau0 must be positive");
    return 21.8 / (F * tau0);
}

}  // namespace qpdyn
