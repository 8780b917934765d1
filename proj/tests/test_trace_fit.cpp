#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qpdyn/constants.hpp"
#include "qpdyn/dynamics.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/rng.hpp"
#include "qpdyn/trace_fit.hpp"
#include "support.hpp"

using namespace qpdyn;
using namespace qpdyn::test;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::vector<double>& ref_grid() {
    static const std::vector<double> g = log_grid(0.2e-3, 80e-3, 40);
    return g;
}

// Decay with r = 1/(170 ns), tau_ss = 18 ms, r' = 0.9 and Gamma0 = 1/(9.5 us).
FitParams b1_params(double C) {
    const double r = 1.0 / 170e-9, tau = 18e-3, rp = 0.9;
    const double x_i = rp / ((1 - rp) * tau * r);
    return {C * x_i, rp, tau, 1.0 / 9.5e-6};
}

}  // namespace

TEST_CASE("model limits", "[trace_fit]") {
    const FitParams f{1e5, 0.9, 18e-3, 4e4};
    CHECK_THAT(gamma_model(10.0, f), WithinRel(4e4, 1e-12));
    CHECK_THAT(gamma_model(0.0, f), WithinRel(1e5 + 4e4, 1e-15));
    const FitParams e{1e5, 0.0, 18e-3, 4e4};
    CHECK_THAT(gamma_model(18e-3 * std::log(2.0), e), WithinRel(0.5e5 + 4e4, 1e-14));
}

TEST_CASE("model equals C x(t) plus the excess rate", "[trace_fit]") {
    const double C = qp_coupling_constant(default_qubit());
    CounterRng rng(12);
    for (int i = 0; i < 50; ++i) {
        const SolutionParams sp{1e-5 + 1e-4 * rng.uniform(), 0.99 * rng.uniform(), 1e-3 + 0.05 * rng.uniform(),
                                1e-6 * rng.uniform()};
        const double gamma_ex = 1e5 * rng.uniform();
        const FitParams f{C * sp.x_i, sp.r_prime, sp.tau_ss, C * sp.x0 + gamma_ex};
        for (double t : ref_grid())
            CHECK_THAT(gamma_model(t, f), WithinRel(C * xqp_analytic(t, sp) + gamma_ex, 1e-12));
    }
}

TEST_CASE("synthetic traces", "[trace_fit]") {
    const FitParams f{1e5, 0.9, 18e-3, 4e4};
    const DecayTrace clean = synth_trace(f, ref_grid(), 0.0, 1);
    for (const auto& s : clean.samples) {
        CHECK(s.gamma == gamma_model(s.t, f));
        CHECK_FALSE(s.sigma.has_value());
    }
    const DecayTrace a = synth_trace(f, ref_grid(), 0.02, 99), b = synth_trace(f, ref_grid(), 0.02, 99);
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        CHECK(a.samples[k].gamma == b.samples[k].gamma);
        CHECK(*a.samples[k].sigma == *b.samples[k].sigma);
    }

    const double t = 5e-3, m = gamma_model(t, f);
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += synth_trace(f, std::vector<double>{t}, 0.02, 1000 + i).samples[0].gamma;
    CHECK(std::abs(sum / n - m) < 3 * 0.02 / 100 * m);
}

TEST_CASE("fit recovers a noisy decay within its uncertainties", "[trace_fit]") {
    const FitParams f{1e5, 0.9, 18e-3, 4e4};
    const DecayTrace tr = synth_trace(f, ref_grid(), 0.02, 2024);
    const FitResult r = fit_gamma_trace(tr);
    CHECK(std::abs(r.amplitude - f.amplitude) <= 3 * r.sigma(0));
    CHECK(std::abs(r.r_prime - f.r_prime) <= 3 * r.sigma(1));
    CHECK(std::abs(r.tau_ss - f.tau_ss) <= 3 * r.sigma(2));
    CHECK(std::abs(r.gamma0 - f.gamma0) <= 3 * r.sigma(3));
    CHECK(rel(r.tau_ss, f.tau_ss) < 0.05);
    CHECK(r.n_used == 40);
}

TEST_CASE("fit nests the pure exponential", "[trace_fit]") {
    const FitParams f{1e5, 0.0, 18e-3, 4e4};
    const FitResult r = fit_gamma_trace(synth_trace(f, ref_grid(), 0.0, 0));
    CHECK(r.r_prime < 1e-3);
    CHECK_THAT(r.tau_ss, WithinRel(f.tau_ss, 1e-6));
}

TEST_CASE("tail constant of a reference-like decay", "[trace_fit]") {
    const double C = qp_coupling_constant(default_qubit());
    const FitResult r = fit_gamma_trace(synth_trace(b1_params(C), ref_grid(), 0.0, 0));
    CHECK(std::abs(r.tau_ss - 18e-3) < 2e-3);
}

TEST_CASE("optimizer invariants", "[trace_fit]") {
    const FitParams f{1e5, 0.9, 18e-3, 4e4};
    const DecayTrace tr = synth_trace(f, ref_grid(), 0.02, 5);
    const FitResult r = fit_gamma_trace(tr);
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) CHECK(r.cost_history[i] <= r.cost_history[i - 1]);

    FitOptions again;
    again.guess = static_cast<FitParams>(r);
    const FitResult r2 = fit_gamma_trace(tr, again);
    // Restarting at the optimum stays there, to far below the statistical uncertainty.
    const double a[4] = {r.amplitude, r.r_prime, r.tau_ss, r.gamma0};
    const double b[4] = {r2.amplitude, r2.r_prime, r2.tau_ss, r2.gamma0};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(b[i] - a[i]) < 1e-4 * r.sigma(i));
}

TEST_CASE("fit is homogeneous in the rate scale", "[trace_fit]") {
    const FitParams f{1e5, 0.8, 10e-3, 3e4};
    DecayTrace tr = synth_trace(f, ref_grid(), 0.02, 77);
    const FitResult a = fit_gamma_trace(tr);
    const double k = 7.0;
    for (auto& s : tr.samples) {
        s.gamma *= k;
        *s.sigma *= k;
    }
    const FitResult b = fit_gamma_trace(tr);
    CHECK_THAT(b.amplitude, WithinRel(k * a.amplitude, 1e-6));
    CHECK_THAT(b.gamma0, WithinRel(k * a.gamma0, 1e-6));
    CHECK_THAT(b.r_prime, WithinRel(a.r_prime, 1e-6));
    CHECK_THAT(b.tau_ss, WithinRel(a.tau_ss, 1e-6));
}

TEST_CASE("dropping early points moves tau_ss by less than its uncertainty", "[trace_fit]") {
    const FitParams f{1e5, 0.9, 18e-3, 4e4};
    const DecayTrace clean = synth_trace(f, ref_grid(), 0.0, 0);
    // Uncertainty from a noisy realization of the same decay.
    const FitResult noisy = fit_gamma_trace(synth_trace(f, ref_grid(), 0.02, 8));
    const FitResult full = fit_gamma_trace(clean);
    for (double tmin : {0.5e-3, 1e-3, 2e-3, 4e-3}) {
        FitOptions o;
        o.t_min = tmin;
        const FitResult cut = fit_gamma_trace(clean, o);
        CHECK(std::abs(cut.tau_ss - full.tau_ss) <= noisy.sigma(2));
    }
}

TEST_CASE("fit input errors", "[trace_fit]") {
    const FitParams f{1e5, 0.9, 18e-3, 4e4};
    const DecayTrace tr = synth_trace(f, log_grid(0.2e-3, 1e-3, 5), 0.0, 0);
    CHECK_THROWS_AS(fit_gamma_trace(tr), InsufficientDataError);

    DecayTrace flat = synth_trace({1.0, 0.0, 1.0, 4e4}, ref_grid(), 0.02, 3);
    CHECK_THROWS_AS(fit_gamma_trace(flat), DegenerateTraceError);

    FitOptions o;
    o.weighting = Weighting::sigma;
    CHECK_THROWS_AS(fit_gamma_trace(synth_trace(f, ref_grid(), 0.0, 0), o), InvalidParameterError);
    CHECK(parse_weighting("absolute") == Weighting::absolute);
    CHECK_THROWS_AS(parse_weighting("l1"), InvalidParameterError);
}

TEST_CASE("rates from a pure exponential fit", "[trace_fit]") {
    FitResult f;
    static_cast<FitParams&>(f) = {1e5, 0.0, 20e-3, 0.0};
    const ExtractedRates e = extract_rates(f, 4.57e10);
    CHECK(e.r == 0.0);
    CHECK_THAT(e.s_max, WithinRel(50.0, 1e-14));
    CHECK_THAT(e.s_min, WithinRel(50.0, 1e-14));
}

TEST_CASE("reference decay lands in the quoted trapping band", "[trace_fit]") {
    const double C = qp_coupling_constant(default_qubit());
    const FitResult r = fit_gamma_trace(synth_trace(b1_params(C), ref_grid(), 0.0, 0));
    const ExtractedRates e = extract_rates(r, C);
    CHECK(e.r > 1.0 / 190e-9);
    CHECK(e.r < 1.0 / 150e-9);
    // 1/(30 ms) with band 1/(54 ms) .. 1/(18 ms).
    CHECK(e.s_min >= 1.0 / 54e-3);
    CHECK(e.s_max <= 1.0 / 18e-3);
    CHECK(e.s_min <= 1.0 / 30e-3);
    CHECK(e.s_max >= 1.0 / 30e-3);
}

TEST_CASE("extraction bands cover the true rates", "[trace_fit]") {
    const double C = qp_coupling_constant(default_qubit());
    CounterRng rng(31);
    int covered = 0;
    const int runs = 100;
    for (int i = 0; i < runs; ++i) {
        const RateParams rp{1.0 / ((100 + 100 * rng.uniform()) * 1e-9), 10 + 90 * rng.uniform(), 1e-5 * rng.uniform()};
        const SteadyState st = steady_state(rp);
        const double x_i = st.x0 + (2e-5 + 2e-4 * rng.uniform());
        const SolutionParams sp = solution_from_rates(rp, x_i);
        const double gamma_ex = 2e4 + 1e5 * rng.uniform();
        const FitParams truth{C * sp.x_i, sp.r_prime, sp.tau_ss, C * sp.x0 + gamma_ex};
        const auto grid = log_grid(0.2e-3, 4.5 * sp.tau_ss, 40);
        const FitResult f = fit_gamma_trace(synth_trace(truth, grid, 0.02, 500 + i));
        const ExtractedRates e = extract_rates(f, C);
        if (e.s_in_band(rp.s, 3.0) && e.r_in_band(rp.r, 3.0)) ++covered;
    }
    CHECK(covered >= 95);
}

TEST_CASE("steady-state line fit", "[trace_fit]") {
    const double C = qp_coupling_constant(default_qubit());
    for (auto [g, gex] : {std::pair{0.7e-4, 1.0 / 26e-6}, std::pair{1.3e-4, 1.0 / 17e-6}}) {
        CounterRng rng(static_cast<std::uint64_t>(g * 1e6));
        std::vector<SteadyStatePoint> pts;
        for (double tau : lin_grid(2e-3, 20e-3, 10)) {
            const double y = C * g * tau + gex;
            pts.push_back({tau, y * (1 + 0.01 * rng.normal()), 0.01 * y});
        }
        const T1Fit f = fit_t1_vs_tau(pts, C);
        CHECK(rel(f.g, g) < 0.05);
        CHECK(rel(f.gamma_ex, gex) < 0.05);
    }
    std::vector<SteadyStatePoint> flat{{1e-3, 3e4, {}}, {5e-3, 5e4, {}}, {10e-3, 4e4, {}}};
    flat[0].inv_t1 = flat[1].inv_t1 = flat[2].inv_t1 = 4e4;
    const T1Fit z = fit_t1_vs_tau(flat, C);
    CHECK_THAT(z.g, WithinAbs(0.0, 1e-20));
    CHECK_THAT(z.gamma_ex, WithinRel(4e4, 1e-12));

    std::vector<SteadyStatePoint> narrow{{1e-3, 3e4, {}}, {1.5e-3, 3e4, {}}, {2e-3, 3e4, {}}};
    CHECK_THROWS_AS(fit_t1_vs_tau(narrow, C), InsufficientSpreadError);
}
