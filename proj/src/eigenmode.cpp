#include "qpdyn/eigenmode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numbers>
#include <thread>

#include "qpdyn/errors.hpp"

namespace qpdyn {

namespace {

constexpr double pi = std::numbers::pi;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Pieces {
    double t, T, Q, X, Y, d2;
    bool near_pole;
};

Pieces pieces(double z, const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp) {
    const double L = g.l_wire;
    const double a_w = L * g.w_wire;
    const double tau_d = L * L / tp.D;
    const double aspect = g.s_pad / a_w;
    const double Pi = v.trapping_power * tau_d / a_w;
    const double n_bar = 0.5 * (v.n_left + v.n_right);
    const double delta = 0.5 * (v.n_right - v.n_left) * Pi;
    const CapSub cs = capacitor_substitution(z, g);
    Pieces p;
    p.t = std::tan(z);
    p.T = cs.value;
    const double B = aspect * z * z - n_bar * Pi;
    p.Q = z - B * p.t;
    p.X = z * (p.t + 2.0 * p.T) + B * (1.0 - 2.0 * p.T * p.t);
    p.Y = 1.0 - 2.0 * p.T * p.t;
    p.d2 = delta * delta;
    p.near_pole = cs.near_pole || std::abs(std::cos(z)) < 1e-10;
    return p;
}

template <class F>
auto parallel_map(std::size_t n, int threads, F&& f) {
    using R = decltype(f(std::size_t{0}));
    std::vector<R> out(n);
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, hw);
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < n; i += workers) out[i] = f(i);
        }));
    for (auto& j : jobs) j.get();
    return out;
}

}  // namespace

void validate(const VortexConfig& v) {
    if (v.n_left < 0 || v.n_right < 0) throw InvalidParameterError("vortex counts must be >= 0");
    if (!(v.trapping_power >= 0.0) || !std::isfinite(v.trapping_power))
        throw InvalidParameterError("trapping power P must be finite and >= 0");
}

void validate(const TransportParams& tp) {
    if (!(tp.D > 0.0) || !std::isfinite(tp.D)) throw InvalidParameterError("diffusion constant D must be positive");
    if (!(tp.s0 >= 0.0) || !std::isfinite(tp.s0)) throw InvalidParameterError("s0 must be finite and >= 0");
}

std::string_view form_name(EigenForm f) { return f == EigenForm::reduced ? "reduced" : "full"; }

EigenForm parse_form(std::string_view s) {
    if (s == "reduced") return EigenForm::reduced;
    if (s == "full") return EigenForm::full;
    throw InvalidParameterError("unknown form '" + std::string(s) + "' (reduced|full)");
}

CapSub capacitor_substitution(double z, const DeviceGeometry& g) {
    if (!(z >= 0.0)) throw DomainError("z must be >= 0");
    const double a = z * g.l_cap / g.l_wire;
    const double b = z * g.h_cap / g.l_wire;
    const double w = g.w_cap / g.w_wire;
    const double ca = std::cos(a), sa = std::sin(a), cb = std::cos(b), sb = std::sin(b);
    CapSub c;
    c.numerator = ca * sb + w * sa * cb;
    c.denominator = ca * cb - w * sa * sb;
    c.value = c.numerator / c.denominator;
    c.near_pole = std::abs(c.denominator) < 1e-10 * (std::abs(c.numerator) + std::abs(c.denominator));
    return c;
}

Residual eigen_residual(double z, const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp,
                        EigenForm form) {
    validate(v);
    validate(tp);
    const Pieces p = pieces(z, g, v, tp);
    const double core = p.X * p.Q + p.d2 * p.t * p.Y;
    if (form == EigenForm::reduced) return {core, p.near_pole};
    // Full form, expanded so that the cot(2 z l / L) dependence is explicit.
    const double eps2 = 2.0 * z * g.l_half_gap / g.l_wire;
    const double sym = p.X * p.X - p.Q * p.Q - p.d2 * (p.Y * p.Y - p.t * p.t);
    const double c = std::cos(eps2) / std::sin(eps2);
    return {sym - 2.0 * c * core, p.near_pole || std::abs(std::sin(eps2)) < 1e-300};
}

Residual scaled_residual(double z, const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp,
                         EigenForm form) {
    validate(v);
    validate(tp);
    if (!(z > 0.0)) throw DomainError("scaled residual needs z > 0");
    const Pieces p = pieces(z, g, v, tp);
    const double core = p.X * p.Q + p.d2 * p.t * p.Y;
    if (form == EigenForm::reduced) return {core / z, p.near_pole};
    const double eps2 = 2.0 * z * g.l_half_gap / g.l_wire;
    const double sym = p.X * p.X - p.Q * p.Q - p.d2 * (p.Y * p.Y - p.t * p.t);
    return {(core - 0.5 * std::tan(eps2) * sym) / z, p.near_pole || std::abs(std::cos(eps2)) < 1e-10};
}

std::vector<double> residual_poles(const DeviceGeometry& g, EigenForm form, double z_max) {
    validate(g);
    std::vector<double> poles;
    for (double z = pi / 2; z < z_max; z += pi) poles.push_back(z);
    if (form == EigenForm::full) {
        const double per = pi * g.l_wire / (2.0 * g.l_half_gap);
        for (double z = per / 2; z < z_max; z += per) poles.push_back(z);
    }
    // Zeros of the capacitor-substitution denominator, by scan and bisection.
    const double fastest = std::max(g.h_cap, g.l_cap) / g.l_wire;
    const double step = std::min(pi / (64.0 * fastest), z_max / 256.0);
    auto den = [&](double z) { return capacitor_substitution(z, g).denominator; };
    double z0 = 0.0, d0 = den(0.0);
    while (z0 < z_max) {
        const double z1 = std::min(z0 + step, z_max);
        const double d1 = den(z1);
        if ((d0 > 0) != (d1 > 0)) {
            double lo = z0, hi = z1, dlo = d0;
            for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
                const double mid = 0.5 * (lo + hi);
                const double dm = den(mid);
                if ((dm > 0) == (dlo > 0)) {
                    lo = mid;
                    dlo = dm;
                } else {
                    hi = mid;
                }
            }
            poles.push_back(0.5 * (lo + hi));
        }
        z0 = z1;
        d0 = d1;
    }
    std::sort(poles.begin(), poles.end());
    return poles;
}

ModeSolution smallest_root(const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp,
                           EigenForm form) {
    validate(g);
    validate(v);
    validate(tp);
    const double tau_d = g.l_wire * g.l_wire / tp.D;
    ModeSolution sol;
    if (v.n_left + v.n_right == 0 || v.trapping_power == 0.0) {
        sol.z = 0.0;
        sol.s = tp.s0;
        sol.branch_note = "no trapping vortices: uniform mode, z = 0";
        return sol;
    }

    const double z_max = pi;
    const std::vector<double> poles = residual_poles(g, form, z_max);
    std::vector<double> edges{0.0};
    edges.insert(edges.end(), poles.begin(), poles.end());
    edges.push_back(z_max);

    // Step no larger than a quarter of the shortest tan period, and fine enough
    // to separate nearby roots.
    const double longest = std::max({g.l_wire, g.h_cap, g.l_cap, form == EigenForm::full ? 2.0 * g.l_half_gap : 0.0});
    const double step = std::min(0.25 * pi * g.l_wire / longest, pi / 512.0);

    auto F = [&](double z) {
        ++sol.evaluations;
        return scaled_residual(z, g, v, tp, form).value;
    };

    std::string diag;
    for (std::size_t iv = 0; iv + 1 < edges.size(); ++iv) {
        const double a = edges[iv], b = edges[iv + 1];
        const double guard = 1e-13 * std::max(1.0, b);
        const double lo_end = a == 0.0 ? 0.0 : a + guard;
        const double hi_end = b - guard;
        if (!(hi_end > lo_end)) continue;

        std::vector<double> zs;
        if (a == 0.0) {
            // Log-spaced start resolves roots far below the linear step.
            const double first = std::min(step, hi_end);
            for (int k = 0; k <= 40; ++k) zs.push_back(first * std::pow(1e-10, 1.0 - k / 40.0));
            for (double z = first + step; z < hi_end; z += step) zs.push_back(z);
        } else {
            for (double z = lo_end; z < hi_end; z += step) zs.push_back(z);
        }
        zs.push_back(hi_end);

        double z_prev = zs.front(), f_prev = F(z_prev);
        for (std::size_t k = 1; k < zs.size(); ++k) {
            const double z_cur = zs[k], f_cur = F(z_cur);
            if (f_prev == 0.0 || (f_prev > 0.0) != (f_cur > 0.0)) {
                double lo = z_prev, hi = z_cur, flo = f_prev, fhi = f_cur;
                sol.bracket_lo = lo;
                sol.bracket_hi = hi;
                if (flo == 0.0) hi = lo, fhi = flo;
                for (int it = 0; it < 400; ++it) {
                    const double tol = 1e-12 * std::min(1.0, hi);
                    if (hi - lo <= tol || fhi == 0.0 || flo == 0.0) break;
                    double zn = 0.5 * (lo + hi);
                    if (it % 2 == 1) {
                        const double zs_ = hi - fhi * (hi - lo) / (fhi - flo);
                        if (zs_ > lo && zs_ < hi) zn = zs_;
                    }
                    const double fn = F(zn);
                    if (fn == 0.0) {
                        lo = hi = zn;
                        flo = fhi = 0.0;
                        break;
                    }
                    if ((fn > 0.0) == (flo > 0.0)) {
                        lo = zn;
                        flo = fn;
                    } else {
                        hi = zn;
                        fhi = fn;
                    }
                }
                double z;
                if (flo == 0.0) z = lo;
                else if (fhi == 0.0) z = hi;
                else {
                    z = hi - fhi * (hi - lo) / (fhi - flo);
                    if (!(z >= lo && z <= hi)) z = 0.5 * (lo + hi);
                }
                const double fz = F(z);
                const double h = std::max(1e-7 * z, 1e-14);
                const double dF = (F(z + h) - F(z - h)) / (2.0 * h);
                sol.z = z;
                sol.s = z * z / tau_d + tp.s0;
                sol.residual_at_root = fz;
                sol.residual_scale = std::abs(dF) * z;
                sol.branch_note = "first sign change in (" + num(a) + ", " + num(b) + ")" +
                                  (iv == 0 ? " below the first pole" : " after " + std::to_string(iv) + " pole(s)");
                return sol;
            }
            z_prev = z_cur;
            f_prev = f_cur;
        }
        diag += " [" + num(a) + ", " + num(b) + "]: " + std::to_string(zs.size()) + " samples";
    }
    throw NoRootFoundError("no sign change of the mode residual below z = " + num(z_max) + ";" + diag +
                           "; poles at" + [&] {
                               std::string s;
                               for (double p : poles) s += " " + num(p);
                               return s.empty() ? std::string(" (none)") : s;
                           }());
}

double small_p_rate(const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp) {
    validate(v);
    validate(tp);
    const DerivedGeometry d = derive(g, tp.D);
    return (v.n_left + v.n_right) * v.trapping_power / d.a_total + tp.s0;
}

double large_p_z(const DeviceGeometry& g) {
    validate(g);
    const double a_w = g.l_wire * g.w_wire;
    const double a_c = 2.0 * (g.l_cap * g.w_cap + g.h_cap * g.w_wire);
    return 0.5 * pi / (1.0 + a_c / a_w);
}

VortexSeries parse_series(std::string_view s) {
    if (s == "alternating") return VortexSeries::alternating;
    if (s == "pairs") return VortexSeries::pairs;
    throw InvalidParameterError("unknown series '" + std::string(s) + "' (alternating|pairs)");
}

std::string_view series_name(VortexSeries s) { return s == VortexSeries::pairs ? "pairs" : "alternating"; }

std::vector<StepEntry> step_sequence(const DeviceGeometry& g, const TransportParams& tp, double P,
                                     VortexSeries series, int max_steps, EigenForm form, int threads) {
    if (max_steps < 1) throw InvalidParameterError("max_steps must be >= 1");
    validate(g);
    validate(tp);
    const double a_total = derive(g, tp.D).a_total;
    return parallel_map(static_cast<std::size_t>(max_steps) + 1, threads, [&](std::size_t k) {
        StepEntry e;
        const int ki = static_cast<int>(k);
        if (series == VortexSeries::pairs) e.n_left = e.n_right = ki;
        else {
            e.n_left = (ki + 1) / 2;
            e.n_right = ki / 2;
        }
        const ModeSolution m = smallest_root(g, VortexConfig{e.n_left, e.n_right, P}, tp, form);
        e.s = m.s;
        e.trapping_sa = (m.s - tp.s0) * a_total;
        return e;
    });
}

SweepMapping parse_mapping(std::string_view s) {
    if (s == "equal") return SweepMapping::equal;
    if (s == "alternating") return SweepMapping::alternating;
    throw InvalidParameterError("unknown mapping '" + std::string(s) + "' (equal|alternating)");
}

std::string_view mapping_name(SweepMapping m) { return m == SweepMapping::equal ? "equal" : "alternating"; }

std::pair<int, int> vortices_at_field(double b, double b_k, double slope, SweepMapping mapping) {
    if (b < b_k) return {0, 0};
    if (mapping == SweepMapping::equal) {
        const int n = static_cast<int>(std::lround(slope * (b - b_k)));
        return {n, n};
    }
    const int n = static_cast<int>(std::lround(2.0 * slope * (b - b_k)));
    return {(n + 1) / 2, n / 2};
}

std::vector<SweepPoint> field_sweep(const DeviceGeometry& g, const TransportParams& tp, double P,
                                    std::span<const double> b_grid, double b_k, double slope, SweepMapping mapping,
                                    EigenForm form, int threads) {
    if (!(b_k > 0.0)) throw InvalidParameterError("b_k must be positive");
    if (!(slope >= 0.0)) throw InvalidParameterError("vortex density slope must be >= 0");
    validate(g);
    validate(tp);
    const double a_total = derive(g, tp.D).a_total;
    return parallel_map(b_grid.size(), threads, [&](std::size_t i) {
        SweepPoint p;
        p.b = b_grid[i];
        std::tie(p.n_left, p.n_right) = vortices_at_field(p.b, b_k, slope, mapping);
        const ModeSolution m = smallest_root(g, VortexConfig{p.n_left, p.n_right, P}, tp, form);
        p.s = m.s;
        p.trapping_sa = (m.s - tp.s0) * a_total;
        return p;
    });
}

}  // namespace qpdyn
