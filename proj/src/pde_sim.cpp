#include "qpdyn/pde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/SparseCholesky>

#include "qpdyn/dynamics.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/trace_fit.hpp"

namespace qpdyn {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Builder {
    std::vector<double> area;
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<Segment> segments;
    double dx_target;
    double D;

    int node() {
        area.push_back(0.0);
        return static_cast<int>(area.size()) - 1;
    }

    void edge(int i, int j, double c) {
        trip.emplace_back(i, i, c);
        trip.emplace_back(j, j, c);
        trip.emplace_back(i, j, -c);
        trip.emplace_back(j, i, -c);
    }

    // Chain of cells from n0 to n1 (a fresh free end when n1 < 0); returns the far node.
    int segment(const std::string& name, int n0, double length, double width, int n1 = -1) {
        const int cells = std::max(4, static_cast<int>(std::ceil(length / dx_target - 1e-9)));
        const double d = length / cells;
        Segment seg;
        seg.name = name;
        seg.width = width;
        seg.dx = d;
        seg.nodes.push_back(n0);
        seg.positions.push_back(0.0);
        area[static_cast<std::size_t>(n0)] += 0.5 * width * d;
        int prev = n0;
        for (int k = 1; k <= cells; ++k) {
            const int cur = (k == cells && n1 >= 0) ? n1 : node();
            area[static_cast<std::size_t>(cur)] += (k == cells ? 0.5 : 1.0) * width * d;
            edge(prev, cur, D * width / d);
            seg.nodes.push_back(cur);
            seg.positions.push_back(k * d);
            prev = cur;
        }
        segments.push_back(std::move(seg));
        return prev;
    }
};

// Symmetric form S = M^-1/2 K M^-1/2 diagonalized once per evolve call.
struct Propagator {
    Eigen::MatrixXd U;
    Eigen::VectorXd lambda;
    Eigen::VectorXd sqrt_m, inv_sqrt_m;

    explicit Propagator(const Discretization& disc) {
        sqrt_m = disc.area.cwiseSqrt();
        inv_sqrt_m = sqrt_m.cwiseInverse();
        Eigen::MatrixXd S = Eigen::MatrixXd(disc.stiffness);
        S = inv_sqrt_m.asDiagonal() * S * inv_sqrt_m.asDiagonal();
        S = 0.5 * (S + S.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of the diffusion operator failed");
        U = es.eigenvectors();
        lambda = es.eigenvalues().cwiseMax(0.0);
        // Pure diffusion: the uniform mode is exactly conserved.
        const int n_traps = disc.vortices.n_left + disc.vortices.n_right;
        if (disc.tp.s0 == 0.0 && (n_traps == 0 || disc.vortices.trapping_power == 0.0)) {
            Eigen::Index imin;
            lambda.minCoeff(&imin);
            lambda[imin] = 0.0;
        }
    }

    // Constant density source b in the eigenbasis.
    Eigen::VectorXd modal_source(const Eigen::VectorXd& b) const { return U.transpose() * (sqrt_m.asDiagonal() * b); }

    // Exact solution of M dx/dt = -K x + M b over h, with beta = modal_source(b).
    void apply(Eigen::VectorXd& x, double h, const Eigen::VectorXd& beta) const {
        Eigen::VectorXd y = U.transpose() * (sqrt_m.asDiagonal() * x);
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double l = lambda[i];
            const double phi = l * h > 1e-300 ? -std::expm1(-l * h) / l : h;
            y[i] = y[i] * std::exp(-l * h) + beta[i] * phi;
        }
        x = inv_sqrt_m.asDiagonal() * (U * y);
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (x[i] < 0.0) x[i] = 0.0;  // roundoff only: the exact propagator is non-negative
    }
};

}  // namespace

Discretization build(const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp, int resolution) {
    if (resolution < 10) throw InvalidParameterError("resolution must be >= 10 nodes per L, got " + std::to_string(resolution));
    validate(g);
    validate(v);
    validate(tp);
    Builder b;
    b.dx_target = g.l_wire / resolution;
    b.D = tp.D;

    Discretization d;
    d.geom = g;
    d.vortices = v;
    d.tp = tp;
    d.resolution = resolution;
    d.pad_left = b.node();
    d.pad_right = b.node();
    d.cross_left = b.node();
    d.cross_right = b.node();
    d.junction = b.node();
    b.area[static_cast<std::size_t>(d.pad_left)] += g.s_pad;
    b.area[static_cast<std::size_t>(d.pad_right)] += g.s_pad;

    b.segment("wire_left", d.pad_left, g.l_wire, g.w_wire, d.cross_left);
    b.segment("wire_right", d.cross_right, g.l_wire, g.w_wire, d.pad_right);
    b.segment("junction_left", d.cross_left, g.l_half_gap, g.w_wire, d.junction);
    b.segment("junction_right", d.junction, g.l_half_gap, g.w_wire, d.cross_right);
    for (int side = 0; side < 2; ++side) {
        const int c = side == 0 ? d.cross_left : d.cross_right;
        const std::string tag = side == 0 ? "left" : "right";
        for (int arm = 0; arm < 2; ++arm) {
            const std::string name = "cap_" + tag + (arm == 0 ? "_up" : "_down");
            const int end = b.segment(name + "_thin", c, g.h_cap, g.w_wire);
            if (g.l_cap > 0.0) b.segment(name + "_wide", end, g.l_cap, g.w_cap);
        }
    }

    d.n_nodes = static_cast<int>(b.area.size());
    d.area = Eigen::Map<Eigen::VectorXd>(b.area.data(), d.n_nodes);
    d.sink = tp.s0 * d.area;
    d.sink[d.pad_left] += v.n_left * v.trapping_power;
    d.sink[d.pad_right] += v.n_right * v.trapping_power;
    for (int i = 0; i < d.n_nodes; ++i) b.trip.emplace_back(i, i, d.sink[i]);
    d.stiffness.resize(d.n_nodes, d.n_nodes);
    d.stiffness.setFromTriplets(b.trip.begin(), b.trip.end());
    d.stiffness.makeCompressed();
    d.segments = std::move(b.segments);
    return d;
}

double Discretization::energy(const Eigen::VectorXd& v) const {
    double e = 0.0;
    for (int k = 0; k < stiffness.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness, k); it; ++it)
            if (it.row() < it.col()) {
                const double d = v[it.row()] - v[it.col()];
                e -= it.value() * d * d;
            }
    for (int i = 0; i < n_nodes; ++i) e += sink[i] * v[i] * v[i];
    return e;
}

SlowestMode slowest_mode(const Discretization& disc) {
    const Eigen::VectorXd& M = disc.area;
    const double L = disc.geom.l_wire;
    // Small negative shift keeps K + delta M definite when K is singular.
    const double delta = 1e-6 * disc.tp.D / (L * L);
    Eigen::SparseMatrix<double> A = disc.stiffness;
    for (int i = 0; i < disc.n_nodes; ++i) A.coeffRef(i, i) += delta * M[i];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) throw NumericalError("factorization for inverse iteration failed");

    // Gershgorin bound on the largest eigenvalue sets the roundoff floor.
    double lam_max = 0.0;
    for (int k = 0; k < disc.stiffness.outerSize(); ++k) {
        double row = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(disc.stiffness, k); it; ++it) row += std::abs(it.value());
        lam_max = std::max(lam_max, row / M[k]);
    }
    const double floor = 1e-13 * lam_max;

    Eigen::VectorXd v = Eigen::VectorXd::Ones(disc.n_nodes);
    auto m_norm = [&](const Eigen::VectorXd& x) { return std::sqrt(x.dot(M.cwiseProduct(x))); };
    v /= m_norm(v);
    double lam = v.dot(disc.stiffness * v);
    int quiet = 0;
    SlowestMode out;
    for (int it = 1; it <= 10000; ++it) {
        Eigen::VectorXd w = solver.solve(M.cwiseProduct(v));
        w /= m_norm(w);
        if (w.dot(M.cwiseProduct(v)) < 0.0) w = -w;
        const Eigen::VectorXd Kw = disc.stiffness * w;
        const double lam_new = w.dot(Kw);
        const Eigen::VectorXd res = Kw - lam_new * M.cwiseProduct(w);
        const double res_norm = std::sqrt(res.dot(M.cwiseInverse().cwiseProduct(res)));
        const double scale = std::abs(lam_new) + delta;
        v = w;
        quiet = std::abs(lam_new - lam) <= 1e-14 * scale + floor ? quiet + 1 : 0;
        lam = lam_new;
        if (res_norm <= 1e-10 * scale || quiet >= 3) {
            out.s = disc.energy(v) / v.dot(M.cwiseProduct(v));
            out.iterations = it;
            out.mode = v / v[disc.junction];
            return out;
        }
    }
    throw NumericalError("inverse iteration did not converge in 10000 iterations (last estimate " + num(lam) + ")");
}

InjectionMode parse_injection_mode(std::string_view s) {
    if (s == "source") return InjectionMode::source;
    if (s == "fixed" || s == "fixed_density") return InjectionMode::fixed_density;
    throw InvalidParameterError("unknown injection mode '" + std::string(s) + "' (source|fixed)");
}

std::string_view injection_mode_name(InjectionMode m) {
    return m == InjectionMode::source ? "source" : "fixed_density";
}

EvolveResult evolve(const Discretization& disc, const EvolveSpec& spec) {
    if (!(spec.r >= 0.0) || !(spec.g >= 0.0)) throw InvalidParameterError("r and g must be >= 0");
    if (!(spec.injection.amplitude >= 0.0) || !(spec.injection.t_inj >= 0.0))
        throw InvalidParameterError("injection amplitude and duration must be >= 0");
    if (spec.t_grid.empty()) throw InvalidParameterError("t_grid is empty");
    if (!(spec.t_grid.front() >= 0.0)) throw InvalidParameterError("t_grid must start at t >= 0");
    for (std::size_t i = 1; i < spec.t_grid.size(); ++i)
        if (!(spec.t_grid[i] > spec.t_grid[i - 1])) throw InvalidParameterError("t_grid must be strictly increasing");
    if (!(spec.tolerance > 0.0)) throw InvalidParameterError("tolerance must be positive");

    const int n = disc.n_nodes;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (!spec.x_init.empty()) {
        if (static_cast<int>(spec.x_init.size()) != n)
            throw InvalidParameterError("x_init has " + std::to_string(spec.x_init.size()) + " entries, expected " +
                                        std::to_string(n));
        for (int i = 0; i < n; ++i) {
            if (!(spec.x_init[static_cast<std::size_t>(i)] >= 0.0)) throw InvalidParameterError("x_init must be >= 0");
            x[i] = spec.x_init[static_cast<std::size_t>(i)];
        }
    }

    const Propagator prop(disc);
    const int J = disc.junction;
    const auto& inj = spec.injection;
    const double src = inj.mode == InjectionMode::source ? inj.amplitude * disc.total_area() / disc.area[J] : 0.0;
    const bool fixed = inj.mode == InjectionMode::fixed_density;

    // Generation and the injection source are constant over a step and go into the
    // exact linear flow; only recombination is split off.
    Eigen::VectorXd b = Eigen::VectorXd::Constant(n, spec.g);
    const Eigen::VectorXd beta_off = prop.modal_source(b);
    b[J] += src;
    const Eigen::VectorXd beta_on = prop.modal_source(b);

    auto reaction = [&](Eigen::VectorXd& y, double h, bool injecting) {
        for (int i = 0; i < n; ++i) y[i] = y[i] / (1.0 + spec.r * y[i] * h);
        if (injecting && fixed) y[J] = inj.amplitude;
    };
    auto strang = [&](Eigen::VectorXd y, double h, bool injecting) {
        reaction(y, 0.5 * h, injecting);
        prop.apply(y, h, injecting ? beta_on : beta_off);
        if (injecting && fixed) y[J] = inj.amplitude;
        reaction(y, 0.5 * h, injecting);
        return y;
    };

    EvolveResult out;
    auto record = [&](double t) {
        out.t.push_back(t);
        out.x_junction.push_back(x[J]);
        out.number.push_back(disc.area.dot(x));
    };

    double t = 0.0;
    const double t_end = spec.t_grid.back();
    double h = std::max(t_end, 1e-12) * 1e-6;
    std::size_t next = 0;
    if (fixed && inj.t_inj > 0.0) x[J] = inj.amplitude;
    while (next < spec.t_grid.size() && spec.t_grid[next] <= 0.0) {
        record(spec.t_grid[next]);
        ++next;
    }
    const double h_min = 1e-15 * std::max(t_end, 1e-9);
    while (next < spec.t_grid.size()) {
        double target = spec.t_grid[next];
        const bool injecting = t < inj.t_inj;
        if (injecting && inj.t_inj < target) target = inj.t_inj;
        const double remaining = target - t;
        const bool last = h >= remaining;
        const double hs = last ? remaining : h;

        const Eigen::VectorXd one = strang(x, hs, injecting);
        const Eigen::VectorXd two = strang(strang(x, 0.5 * hs, injecting), 0.5 * hs, injecting);
        // Area-weighted error relative to the area-weighted state.
        const Eigen::VectorXd diff = one - two;
        const double norm = std::sqrt(disc.area.dot(two.cwiseAbs2()));
        const double err = std::sqrt(disc.area.dot(diff.cwiseAbs2())) / (spec.tolerance * norm + 1e-300);
        if (err <= 1.0) {
            x = two;
            t = last ? target : t + hs;
            ++out.steps;
            if (last && next < spec.t_grid.size() && t == spec.t_grid[next]) {
                record(t);
                ++next;
            }
            const double grow = err > 0.0 ? 0.9 * std::pow(err, -1.0 / 3.0) : 4.0;
            if (!last) h = hs * std::clamp(grow, 0.2, 4.0);
            else h = std::max(h, hs * std::clamp(grow, 0.2, 4.0));
        } else {
            ++out.rejected;
            h = hs * std::clamp(0.9 * std::pow(err, -1.0 / 3.0), 0.1, 0.5);
            if (h < h_min)
                throw NumericalError("step size underflow at t = " + num(t) + " s (h = " + num(h) + ", error ratio " +
                                     num(err) + ")");
        }
        if (out.steps + out.rejected > 50'000'000) throw NumericalError("step budget exhausted at t = " + num(t));
    }
    out.final_state = x;
    return out;
}

FactorizationReport factorized_dynamics_check(const Discretization& disc, double r, double g, double x_init_amp,
                                              const FactorizationOptions& opt) {
    if (!(r >= 0.0) || !(g >= 0.0) || !(x_init_amp > 0.0))
        throw InvalidParameterError("need r >= 0, g >= 0 and x_init_amp > 0");
    const SlowestMode sm = slowest_mode(disc);
    FactorizationReport rep;
    rep.s_mode = sm.s;
    rep.r = r;
    rep.g = g;
    rep.x_init_amp = x_init_amp;
    rep.recombination_ratio = sm.s > 0.0 ? r * x_init_amp / sm.s : std::numeric_limits<double>::infinity();
    rep.within_validity = rep.recombination_ratio <= 10.0;

    const RateParams rp{r, sm.s, g};
    double t_end = opt.t_end;
    if (!(t_end > 0.0)) {
        if (r == 0.0 && sm.s == 0.0) throw InvalidParameterError("no decay: set t_end explicitly");
        t_end = 4.0 * steady_state(rp).tau_ss;
        if (!std::isfinite(t_end)) t_end = 100.0 / (r * x_init_amp);
    }
    if (!(t_end > opt.t_start)) throw InvalidParameterError("t_end must exceed t_start");

    EvolveSpec spec;
    spec.r = r;
    spec.g = g;
    spec.t_grid = {0.0};
    for (double t : log_grid(opt.t_start, t_end, opt.points)) spec.t_grid.push_back(t);
    spec.x_init.resize(static_cast<std::size_t>(disc.n_nodes));
    for (int i = 0; i < disc.n_nodes; ++i) spec.x_init[static_cast<std::size_t>(i)] = x_init_amp * std::max(0.0, sm.mode[i]);
    const EvolveResult ev = evolve(disc, spec);

    for (std::size_t k = 1; k < ev.t.size(); ++k) {
        const double t = ev.t[k];
        const double model = xqp_from_rates(t, rp, x_init_amp);
        rep.t.push_back(t);
        rep.x_pde.push_back(ev.x_junction[k]);
        rep.x_model.push_back(model);
        const double dev = std::abs(ev.x_junction[k] - model) / model;
        if (dev > rep.max_rel_deviation) {
            rep.max_rel_deviation = dev;
            rep.t_at_max = t;
        }
    }
    return rep;
}

}  // namespace qpdyn
