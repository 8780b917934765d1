#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qpdyn/dynamics.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/rng.hpp"
#include "qpdyn/trace_fit.hpp"
#include "support.hpp"

using namespace qpdyn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Log-uniform draw on [lo, hi].
double log_uniform(CounterRng& r, double lo, double hi) { return lo * std::pow(hi / lo, r.uniform()); }

}  // namespace

TEST_CASE("closed form boundary values", "[dynamics]") {
    const SolutionParams p{1e-4, 0.9, 18e-3, 2e-6};
    CHECK_THAT(xqp_analytic(0.0, p), WithinRel(p.x_i + p.x0, 1e-15));
    CHECK_THAT(xqp_analytic(1e3, p), WithinRel(p.x0, 1e-12));
    const SolutionParams e{1e-4, 0.0, 18e-3, 0.0};
    CHECK_THAT(xqp_analytic(e.tau_ss, e), WithinRel(1e-4 * std::exp(-1.0), 1e-14));
    CHECK_THROWS_AS(xqp_analytic(-1.0, p), DomainError);
    CHECK_THROWS_AS(xqp_analytic(0.0, SolutionParams{1e-4, 1.0, 1.0, 0.0}), InvalidParameterError);
}

TEST_CASE("closed form matches adaptive integration", "[dynamics]") {
    CounterRng rng(21);
    for (int i = 0; i < 40; ++i) {
        const RateParams rp{log_uniform(rng, 1e3, 1e8), log_uniform(rng, 1.0, 1e4), log_uniform(rng, 1e-8, 1e-3)};
        const double x_i = log_uniform(rng, 1e-7, 1e-3);
        const SolutionParams p = solution_from_rates(rp, x_i);
        const auto grid = log_grid(1e-3 * p.tau_ss, 10 * p.tau_ss, 30);
        std::vector<double> t{0.0};
        t.insert(t.end(), grid.begin(), grid.end());
        const auto ode = integrate_ode(rp, x_i + p.x0, t);
        for (std::size_t k = 0; k < t.size(); ++k) CHECK_THAT(ode[k], WithinRel(xqp_analytic(t[k], p), 1e-8));
    }
}

TEST_CASE("steady state of the reference rates", "[dynamics]") {
    const SteadyState st = steady_state({1.0 / 170e-9, 1.0 / 30e-3, 1e-4});
    CHECK_THAT(st.x0, WithinRel(2.2e-6, 0.05));
    CHECK_THAT(st.tau_ss, WithinRel(17e-3, 0.05));
    // Quadratic balance holds exactly.
    CHECK_THAT((1.0 / 170e-9) * st.x0 * st.x0 + st.x0 / 30e-3, WithinRel(1e-4, 1e-13));

    const SteadyState lin = steady_state({0.0, 50.0, 1e-3});
    CHECK(lin.x0 == 1e-3 / 50.0);
    CHECK(lin.tau_ss == 1.0 / 50.0);
    const SteadyState nog = steady_state({1e6, 50.0, 0.0});
    CHECK(nog.x0 == 0.0);
    CHECK(nog.tau_ss == 1.0 / 50.0);
    CHECK_THROWS_AS(steady_state({0.0, 0.0, 1e-4}), DegenerateSystemError);
    CHECK_THROWS_AS(steady_state({-1.0, 0.0, 0.0}), InvalidParameterError);
}

TEST_CASE("rates from solution", "[dynamics]") {
    const RateParams zero = rates_from_solution({1e-4, 0.0, 20e-3, 3e-6});
    CHECK(zero.r == 0.0);
    CHECK_THAT(zero.s, WithinRel(50.0, 1e-15));
    CHECK_THAT(zero.g, WithinRel(3e-6 / 20e-3, 1e-15));

    const RateParams rp{1e6, 100.0, 1e-4};
    const RateParams back = rates_from_solution(solution_from_rates(rp, 1e-4));
    CHECK_THAT(back.r, WithinRel(rp.r, 1e-10));
    CHECK_THAT(back.s, WithinRel(rp.s, 1e-10));
    CHECK_THAT(back.g, WithinRel(rp.g, 1e-10));

    // A reference-like decay: x_i from r' and tau_ss at r = 1/(170 ns) lands back on r.
    const double r = 1.0 / 170e-9, tau = 18e-3, rp9 = 0.9;
    const double x_i = rp9 / ((1 - rp9) * tau * r);
    const RateParams b1 = rates_from_solution({x_i, rp9, tau, 0.0});
    CHECK(b1.r > 1.0 / 190e-9);
    CHECK(b1.r < 1.0 / 150e-9);

    CHECK_THROWS_AS(rates_from_solution({1e-4, 0.5, 1e-2, 1.0}), NegativeRateError);
}

TEST_CASE("round trip over six decades of each rate", "[dynamics]") {
    CounterRng rng(8);
    for (int i = 0; i < 500; ++i) {
        const RateParams rp{log_uniform(rng, 1e2, 1e8), log_uniform(rng, 1e-1, 1e5), log_uniform(rng, 1e-9, 1e-3)};
        const double x_i = log_uniform(rng, 1e-8, 1e-2);
        const RateParams back = rates_from_solution(solution_from_rates(rp, x_i));
        CHECK_THAT(back.r, WithinRel(rp.r, 1e-10));
        // s and g come from differences; judge them against the terms they are formed from.
        const SteadyState st = steady_state(rp);
        CHECK_THAT(back.s, WithinAbs(rp.s, 1e-10 * (rp.s + 2 * rp.r * st.x0)));
        CHECK_THAT(back.g, WithinAbs(rp.g, 1e-10 * (rp.g + rp.r * st.x0 * st.x0 + st.x0 / st.tau_ss)));
    }
}

TEST_CASE("extraction bounds", "[dynamics]") {
    const double C = 4.57e10;
    // Reference bound 1/(4 r tau^2) at r = 1/(170 ns), tau = 18 ms.
    const double r = 1.0 / 170e-9, tau = 18e-3;
    CHECK_THAT(1.0 / (4 * r * tau * tau), WithinRel(1.31e-4, 0.01));
    const double rp9 = 0.9, x_i = rp9 / ((1 - rp9) * tau * r);
    const ExtractionBounds b = extraction_bounds({x_i, rp9, tau, 0.0}, 1e5, C);
    CHECK_THAT(b.g_max, WithinRel(1.0 / (4 * r * tau * tau), 1e-12));

    const ExtractionBounds z = extraction_bounds({1e-4, 0.0, tau, 0.0}, 0.0, C);
    CHECK(z.s_min == z.s_max);
    CHECK_THAT(z.s_max, WithinRel(1.0 / tau, 1e-15));

    const ExtractionBounds neg = extraction_bounds({1e-6, 0.9, tau, 0.0}, 1e7, C);
    CHECK(neg.s_min == 0.0);
}

TEST_CASE("true trapping rate lies inside the extraction bounds", "[dynamics]") {
    CounterRng rng(17);
    const double C = 4.57e10;
    for (int i = 0; i < 500; ++i) {
        const RateParams rp{log_uniform(rng, 1e5, 1e8), log_uniform(rng, 1.0, 1e3), log_uniform(rng, 1e-7, 1e-3)};
        const double x_i = log_uniform(rng, 1e-6, 1e-3);
        const SolutionParams p = solution_from_rates(rp, x_i);
        const double gamma_ex = rng.uniform() * 1e5;
        const ExtractionBounds b = extraction_bounds(p, C * p.x0 + gamma_ex, C);
        CHECK(rp.s >= b.s_min * (1 - 1e-12));
        CHECK(rp.s <= b.s_max * (1 + 1e-12));
        CHECK(rp.g <= b.g_max * (1 + 1e-12));
    }
}

TEST_CASE("r' clamping", "[dynamics]") {
    std::vector<std::string> w;
    CHECK(clamp_r_prime(0.5, &w) == 0.5);
    CHECK(w.empty());
    CHECK(clamp_r_prime(1.0, &w) == r_prime_max);
    CHECK(w.size() == 1);
    CHECK_THROWS_AS(clamp_r_prime(1.01, &w), DomainError);
    CHECK_THROWS_AS(clamp_r_prime(-0.1, &w), DomainError);
}

TEST_CASE("branches of the rate solution", "[dynamics]") {
    CHECK(xqp_from_rates(5.0, {0.0, 0.0, 0.0}, 3e-5) == 3e-5);
    const double r = 1e6, x = 1e-4;
    CHECK_THAT(xqp_from_rates(1.0 / (r * x), {r, 0.0, 0.0}, x), WithinRel(x / 2, 1e-15));
    CHECK_THAT(xqp_pure_recombination(1.0 / (r * x), r, x), WithinRel(x / 2, 1e-15));

    CounterRng rng(4);
    for (int i = 0; i < 40; ++i) {
        const RateParams rp{log_uniform(rng, 1e3, 1e7), log_uniform(rng, 1.0, 1e3), log_uniform(rng, 1e-8, 1e-4)};
        const double x0 = log_uniform(rng, 1e-8, 1e-3);
        const SteadyState st = steady_state(rp);
        std::vector<double> t{0.0};
        for (double v : log_grid(1e-4 * st.tau_ss, 10 * st.tau_ss, 20)) t.push_back(v);
        const auto ode = integrate_ode(rp, x0, t);
        for (std::size_t k = 0; k < t.size(); ++k) CHECK_THAT(xqp_from_rates(t[k], rp, x0), WithinRel(ode[k], 1e-8));
    }
}

TEST_CASE("trajectories never cross the steady state", "[dynamics]") {
    CounterRng rng(6);
    for (int i = 0; i < 30; ++i) {
        const RateParams rp{log_uniform(rng, 1e3, 1e7), log_uniform(rng, 1.0, 1e3), log_uniform(rng, 1e-8, 1e-4)};
        const SteadyState st = steady_state(rp);
        const double above = st.x0 * (1 + 10 * rng.uniform()) + 1e-9;
        const double below = st.x0 * rng.uniform();
        const auto t = lin_grid(0.0, 20 * st.tau_ss, 200);
        for (double v : integrate_ode(rp, above, t)) CHECK(v >= st.x0 * (1 - 1e-9));
        for (double v : integrate_ode(rp, below, t)) CHECK(v <= st.x0 * (1 + 1e-9));
        for (double tt : t) CHECK(xqp_from_rates(tt, rp, above) > 0.0);
    }
}

TEST_CASE("closed form is continuous and decays to x0", "[dynamics]") {
    CounterRng rng(2);
    for (int i = 0; i < 50; ++i) {
        const SolutionParams p{log_uniform(rng, 1e-7, 1e-3), 0.999 * rng.uniform(), log_uniform(rng, 1e-4, 1.0),
                               log_uniform(rng, 1e-9, 1e-5)};
        double prev = xqp_analytic(0.0, p);
        for (double t : log_grid(1e-6 * p.tau_ss, 50 * p.tau_ss, 400)) {
            const double v = xqp_analytic(t, p);
            CHECK(v > 0.0);
            CHECK(v <= prev);
            prev = v;
        }
        CHECK_THAT(prev, WithinRel(p.x0, 1e-9));
    }
}
