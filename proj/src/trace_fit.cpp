#include "qpdyn/trace_fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "qpdyn/dynamics.hpp"
#include "qpdyn/rng.hpp"

namespace qpdyn {

namespace {

constexpr double gamma0_eps = 1e-3;  // 1/s, keeps log(Gamma0 + eps) finite at Gamma0 = 0

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Vec4 to_theta(const FitParams& p) {
    const double rp = std::clamp(p.r_prime, 1e-300, r_prime_max);
    return Vec4(std::log(p.amplitude), std::log(rp) - std::log1p(-rp), std::log(p.tau_ss),
                std::log(p.gamma0 + gamma0_eps));
}

FitParams from_theta(const Vec4& th) {
    FitParams p;
    p.amplitude = std::exp(th[0]);
    // Logistic written to stay accurate at both ends.
    p.r_prime = th[1] >= 0.0 ? 1.0 / (1.0 + std::exp(-th[1])) : std::exp(th[1]) / (1.0 + std::exp(th[1]));
    p.tau_ss = std::exp(th[2]);
    p.gamma0 = std::max(0.0, std::exp(th[3]) - gamma0_eps);
    return p;
}

// Model value and its gradient in natural parameters (A, r', tau, Gamma0).
double model_and_grad(double t, const FitParams& p, Vec4* grad) {
    const double one_m = 1.0 - p.r_prime;
    const double em1 = std::expm1(t / p.tau_ss);
    const double u = em1 + one_m;
    const double ex = p.amplitude * one_m / u;
    if (grad) {
        (*grad)[0] = one_m / u;
        (*grad)[1] = -p.amplitude * em1 / (u * u);
        (*grad)[2] = p.amplitude * one_m * (em1 + 1.0) * t / (p.tau_ss * p.tau_ss * u * u);
        (*grad)[3] = 1.0;
    }
    return ex + p.gamma0;
}

struct Problem {
    std::vector<double> t, y, w;  // w: 1/sigma for the sigma weighting
    Weighting weighting;

    std::size_t n() const { return t.size(); }

    // Residuals and optionally the Jacobian with respect to natural parameters.
    void eval(const FitParams& p, Eigen::VectorXd& r, Eigen::MatrixXd* J) const {
        r.resize(static_cast<Eigen::Index>(n()));
        if (J) J->resize(static_cast<Eigen::Index>(n()), 4);
        Vec4 g;
        for (std::size_t i = 0; i < n(); ++i) {
            const double m = model_and_grad(t[i], p, J ? &g : nullptr);
            const auto k = static_cast<Eigen::Index>(i);
            switch (weighting) {
                case Weighting::relative:
                    r[k] = std::log(m) - std::log(y[i]);
                    if (J) J->row(k) = (g / m).transpose();
                    break;
                case Weighting::absolute:
                    r[k] = m - y[i];
                    if (J) J->row(k) = g.transpose();
                    break;
                case Weighting::sigma:
                    r[k] = (m - y[i]) * w[i];
                    if (J) J->row(k) = (g * w[i]).transpose();
                    break;
            }
        }
    }

    // Size of the residual vector that a perfect fit would be compared against.
    double cost_floor() const {
        double s = 0.0;
        for (std::size_t i = 0; i < n(); ++i) {
            double ref = 1.0;
            if (weighting == Weighting::absolute) ref = y[i];
            if (weighting == Weighting::sigma) ref = y[i] * w[i];
            s += ref * ref;
        }
        return 1e-28 * s;
    }
};

Mat4 theta_scale(const FitParams& p) {
    Vec4 d(p.amplitude, p.r_prime * (1.0 - p.r_prime), p.tau_ss, p.gamma0 + gamma0_eps);
    return d.asDiagonal();
}

// Equilibrated first: parameters differ by many orders of magnitude in size.
Mat4 pseudo_inverse(const Mat4& A) {
    Vec4 d;
    for (int i = 0; i < 4; ++i) d[i] = A(i, i) > 0.0 ? 1.0 / std::sqrt(A(i, i)) : 0.0;
    const Mat4 B = d.asDiagonal() * A * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat4> es(B);
    const auto& ev = es.eigenvalues();
    const double tol = 1e-14 * std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    Vec4 inv;
    for (int i = 0; i < 4; ++i) inv[i] = ev[i] > tol ? 1.0 / ev[i] : 0.0;
    return d.asDiagonal() * (es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose()) * d.asDiagonal();
}

// A trace whose spread is consistent with its own point-to-point scatter carries
// no decay information.
void check_degenerate(const Problem& pb) {
    const std::size_t n = pb.n();
    std::vector<double> ly(n);
    for (std::size_t i = 0; i < n; ++i) ly[i] = std::log(pb.y[i]);
    const double mean = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : ly) ss += (v - mean) * (v - mean);
    const double rms = std::sqrt(ss / static_cast<double>(n));
    std::vector<double> d2;
    for (std::size_t i = 1; i + 1 < n; ++i) d2.push_back(std::abs(ly[i + 1] - 2.0 * ly[i] + ly[i - 1]) / std::sqrt(6.0));
    std::nth_element(d2.begin(), d2.begin() + static_cast<long>(d2.size() / 2), d2.end());
    const double noise = d2[d2.size() / 2] / 0.6745;
    if (rms <= 1.5 * noise || rms < 1e-12)
        throw DegenerateTraceError("trace is flat within its scatter (log-rms " + num(rms) + ", noise " + num(noise) +
                                   "); only Gamma0 is identifiable");
}

}  // namespace

void DecayTrace::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!std::isfinite(s.t) || !std::isfinite(s.gamma))
            throw ParseError("sample " + std::to_string(i + 1) + ": non-finite value");
        if (i > 0 && !(s.t > samples[i - 1].t))
            throw ParseError("sample " + std::to_string(i + 1) + ": t not strictly increasing");
        if (!(s.gamma > 0.0)) throw ParseError("sample " + std::to_string(i + 1) + ": gamma must be positive");
        if (s.sigma && !(*s.sigma > 0.0))
            throw ParseError("sample " + std::to_string(i + 1) + ": sigma must be positive");
    }
}

bool DecayTrace::has_sigma() const {
    return !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.sigma.has_value(); });
}

std::string_view weighting_name(Weighting w) {
    switch (w) {
        case Weighting::relative: return "relative";
        case Weighting::absolute: return "absolute";
        case Weighting::sigma: return "sigma";
    }
    return "?";
}

Weighting parse_weighting(std::string_view s) {
    if (s == "relative") return Weighting::relative;
    if (s == "absolute") return Weighting::absolute;
    if (s == "sigma") return Weighting::sigma;
    throw InvalidParameterError("unknown weighting '" + std::string(s) + "'");
}

double FitResult::sigma(int i) const { return std::sqrt(std::max(0.0, covariance[static_cast<std::size_t>(5 * i)])); }

double gamma_model(double t, const FitParams& f) { return model_and_grad(t, f, nullptr); }

FitParams initial_guess(const DecayTrace& trace, double t_min) {
    std::vector<TraceSample> used;
    for (const auto& s : trace.samples)
        if (s.t >= t_min) used.push_back(s);
    if (used.size() < 2) throw InsufficientDataError("need at least 2 samples for an initial guess");
    FitParams p;
    p.gamma0 = std::min_element(used.begin(), used.end(), [](auto& a, auto& b) { return a.gamma < b.gamma; })->gamma;
    p.r_prime = 0.5;
    p.amplitude = std::max(used.front().gamma - p.gamma0, 1e-3 * used.front().gamma);

    // Log-linear slope of the excess over the last third; samples at or below
    // the floor carry no slope information and are skipped.
    const std::size_t start = used.size() - std::max<std::size_t>(2, used.size() / 3);
    double sw = 0, st = 0, sl = 0, stt = 0, stl = 0;
    for (std::size_t i = start; i < used.size(); ++i) {
        const double ex = used[i].gamma - p.gamma0;
        if (!(ex > 0.0)) continue;
        const double l = std::log(ex);
        sw += 1;
        st += used[i].t;
        sl += l;
        stt += used[i].t * used[i].t;
        stl += used[i].t * l;
    }
    const double span = used.back().t - used.front().t;
    p.tau_ss = span / 3.0;
    if (sw >= 2) {
        const double den = sw * stt - st * st;
        const double slope = den > 0 ? (sw * stl - st * sl) / den : 0.0;
        if (slope < 0.0) p.tau_ss = std::clamp(-1.0 / slope, 1e-3 * span, 10.0 * span);
    }
    if (!(p.tau_ss > 0.0)) p.tau_ss = 1.0;
    return p;
}

FitResult fit_gamma_trace(const DecayTrace& trace, const FitOptions& opt) {
    trace.validate();
    Problem pb;
    pb.weighting = opt.weighting;
    for (const auto& s : trace.samples) {
        if (s.t < opt.t_min) continue;
        pb.t.push_back(s.t);
        pb.y.push_back(s.gamma);
        if (opt.weighting == Weighting::sigma) {
            if (!s.sigma) throw InvalidParameterError("sigma weighting requires a sigma column");
            pb.w.push_back(1.0 / *s.sigma);
        }
    }
    if (pb.n() < 6)
        throw InsufficientDataError("need at least 6 samples at t >= " + num(opt.t_min) + " s, have " +
                                    std::to_string(pb.n()));
    check_degenerate(pb);

    FitResult res;
    res.weighting = opt.weighting;
    res.n_used = static_cast<int>(pb.n());
    res.t_min_applied = opt.t_min;

    FitParams start = opt.guess ? *opt.guess : initial_guess(trace, opt.t_min);
    start.r_prime = clamp_r_prime(start.r_prime, &res.warnings);
    if (!(start.amplitude > 0.0) || !(start.tau_ss > 0.0) || !(start.gamma0 >= 0.0))
        throw InvalidParameterError("initial guess outside the feasible region");

    Vec4 th = to_theta(start);
    Eigen::VectorXd r;
    Eigen::MatrixXd Jn;
    FitParams p = from_theta(th);
    pb.eval(p, r, &Jn);
    double cost = 0.5 * r.squaredNorm();
    if (!std::isfinite(cost)) throw NumericalError("objective is not finite at the initial guess");
    const double floor = pb.cost_floor();

    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        const Eigen::MatrixXd J = Jn * theta_scale(p);
        const Mat4 JtJ = J.transpose() * J;
        const Vec4 grad = J.transpose() * r;

        // Scaled gradient test: residual nearly orthogonal to every Jacobian column.
        double gmax = 0.0;
        const double rn = r.norm();
        for (int j = 0; j < 4; ++j) {
            const double cn = J.col(j).norm();
            if (cn > 0.0 && rn > 0.0) gmax = std::max(gmax, std::abs(grad[j]) / (cn * rn));
        }
        if (cost <= floor || gmax <= 1e-10) {
            converged = true;
            break;
        }

        bool accepted = false;
        while (!accepted) {
            Mat4 A = JtJ;
            for (int j = 0; j < 4; ++j) A(j, j) += lambda * std::max(JtJ(j, j), 1e-30);
            const Vec4 step = A.ldlt().solve(-grad);
            const Vec4 th_new = th + step;
            const FitParams p_new = from_theta(th_new);
            Eigen::VectorXd r_new;
            pb.eval(p_new, r_new, nullptr);
            const double cost_new = 0.5 * r_new.squaredNorm();
            if (std::isfinite(cost_new) && cost_new < cost) {
                const double predicted = -(grad.dot(step) + 0.5 * step.dot(JtJ * step));
                const double actual = cost - cost_new;
                const bool small_step = step.norm() <= 1e-10 * (th.norm() + 1e-10);
                const bool small_decrease = actual <= 1e-12 * cost && std::abs(predicted) <= 1e-12 * cost;
                th = th_new;
                p = p_new;
                cost = cost_new;
                pb.eval(p, r, &Jn);
                res.cost_history.push_back(cost);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (small_step || small_decrease) converged = true;
            } else {
                lambda *= 4.0;
                if (lambda > 1e16) {
                    // No descent possible from here: a stationary point up to rounding.
                    converged = true;
                    break;
                }
            }
        }
    }
    if (!converged)
        throw NonConvergenceError("fit did not converge in " + std::to_string(opt.max_iterations) + " iterations", p,
                                  std::sqrt(2.0 * cost));

    static_cast<FitParams&>(res) = p;
    res.r_prime = clamp_r_prime(res.r_prime, &res.warnings);
    res.iterations = it;
    res.residual_norm = std::sqrt(2.0 * cost);

    const Mat4 JtJ = Jn.transpose() * Jn;
    Mat4 cov = pseudo_inverse(JtJ);
    if (opt.weighting != Weighting::sigma) cov *= 2.0 * cost / static_cast<double>(pb.n() - 4);
    cov = 0.5 * (cov + cov.transpose());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) res.covariance[static_cast<std::size_t>(4 * i + j)] = cov(i, j);

    // Flag (not drop) residual outliers.
    const double rms = res.residual_norm / std::sqrt(static_cast<double>(pb.n()));
    int outliers = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (std::abs(r[i]) > 4.0 * rms && rms > 0.0) ++outliers;
    if (outliers > 0) res.warnings.push_back(std::to_string(outliers) + " residual(s) beyond 4x rms");
    return res;
}

bool ExtractedRates::r_in_band(double r_true, double k) const { return std::abs(r - r_true) <= k * sigma_r; }

bool ExtractedRates::s_in_band(double s_true, double k) const {
    return s_true >= s_min - k * sigma_s_min && s_true <= s_max + k * sigma_s_max;
}

namespace {

struct RawExtraction {
    double x_i, r, x0_max, s_min, s_max, g_max, g_bound;
    bool capped;
};

RawExtraction extract_raw(const Vec4& p, double C) {
    RawExtraction e{};
    const double A = p[0], rp = p[1], tau = p[2], g0 = p[3];
    e.x_i = A / C;
    SolutionParams sp{e.x_i, rp, tau, 0.0};
    const RateParams at_zero = rates_from_solution(sp);
    e.r = at_zero.r;
    e.s_max = at_zero.s;
    e.x0_max = g0 / C;
    if (rp > 0.0) {
        const double x0_s_zero = (1.0 - rp) * e.x_i / (2.0 * rp);
        if (x0_s_zero < e.x0_max) {
            e.x0_max = x0_s_zero;
            e.capped = true;
        }
    }
    sp.x0 = e.x0_max;
    const RateParams at_max = rates_from_solution(sp);
    const ExtractionBounds b = extraction_bounds(sp, g0, C);
    e.s_min = std::max(at_max.s, b.s_min);
    e.g_max = at_max.g;
    e.g_bound = b.g_max;
    return e;
}

}  // namespace

ExtractedRates extract_rates(const FitResult& f, double C) {
    if (!(C > 0.0)) throw InvalidParameterError("C must be positive");
    if (!(f.amplitude > 0.0) || !(f.tau_ss > 0.0) || !(f.gamma0 >= 0.0) || !(f.r_prime >= 0.0 && f.r_prime < 1.0))
        throw InvalidParameterError("fit result outside its valid domain");
    const Vec4 p(f.amplitude, f.r_prime, f.tau_ss, f.gamma0);
    const RawExtraction e0 = extract_raw(p, C);

    ExtractedRates out;
    out.C = C;
    out.x_i = e0.x_i;
    out.r = e0.r;
    out.x0_max = e0.x0_max;
    out.x0_capped = e0.capped;
    out.s_min = e0.s_min;
    out.s_max = e0.s_max;
    out.g_min = 0.0;
    out.g_max = e0.g_max;
    out.g_bound = e0.g_bound;

    // First-order propagation with central differences.
    Mat4 cov;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) cov(i, j) = f.covariance[static_cast<std::size_t>(4 * i + j)];
    Eigen::Matrix<double, 5, 4> G = Eigen::Matrix<double, 5, 4>::Zero();
    for (int j = 0; j < 4; ++j) {
        double h = 1e-6 * std::max(std::abs(p[j]), j == 1 ? 1e-6 : 1e-300);
        if (j == 3 && p[3] == 0.0) h = 1e-6;
        Vec4 lo = p, hi = p;
        hi[j] += h;
        lo[j] -= h;
        if (j == 1) hi[1] = std::min(hi[1], r_prime_max);
        if (lo[j] < 0.0) lo[j] = p[j];
        const double dh = hi[j] - lo[j];
        if (!(dh > 0.0)) continue;
        const RawExtraction a = extract_raw(hi, C), b = extract_raw(lo, C);
        G(0, j) = (a.x_i - b.x_i) / dh;
        G(1, j) = (a.r - b.r) / dh;
        G(2, j) = (a.s_min - b.s_min) / dh;
        G(3, j) = (a.s_max - b.s_max) / dh;
        G(4, j) = (a.g_max - b.g_max) / dh;
    }
    const Eigen::Matrix<double, 5, 5> V = G * cov * G.transpose();
    auto sd = [&](int i) { return std::sqrt(std::max(0.0, V(i, i))); };
    out.sigma_x_i = sd(0);
    out.sigma_r = sd(1);
    out.sigma_s_min = sd(2);
    out.sigma_s_max = sd(3);
    out.sigma_g_max = sd(4);
    return out;
}

T1Fit fit_t1_vs_tau(std::span<const SteadyStatePoint> points, double C) {
    if (!(C > 0.0)) throw InvalidParameterError("C must be positive");
    if (points.size() < 3) throw InsufficientDataError("need at least 3 (tau_ss, 1/T1) points");
    double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0;
    bool all_sigma = true;
    for (const auto& p : points) {
        if (!(p.tau_ss > 0.0) || !(p.inv_t1 > 0.0)) throw InvalidParameterError("tau_ss and 1/T1 must be positive");
        if (p.sigma_inv_t1 && !(*p.sigma_inv_t1 > 0.0)) throw InvalidParameterError("sigma must be positive");
        tmin = std::min(tmin, p.tau_ss);
        tmax = std::max(tmax, p.tau_ss);
        all_sigma = all_sigma && p.sigma_inv_t1.has_value();
    }
    if (tmax < 3.0 * tmin)
        throw InsufficientSpreadError("tau_ss values span only a factor " + num(tmax / tmin) + " (need >= 3)");

    double sw = 0, sx = 0, sy = 0;
    for (const auto& p : points) {
        const double w = all_sigma ? 1.0 / (*p.sigma_inv_t1 * *p.sigma_inv_t1) : 1.0;
        sw += w;
        sx += w * p.tau_ss;
        sy += w * p.inv_t1;
    }
    const double xb = sx / sw, yb = sy / sw;
    double sxx = 0, sxy = 0;
    for (const auto& p : points) {
        const double w = all_sigma ? 1.0 / (*p.sigma_inv_t1 * *p.sigma_inv_t1) : 1.0;
        sxx += w * (p.tau_ss - xb) * (p.tau_ss - xb);
        sxy += w * (p.tau_ss - xb) * (p.inv_t1 - yb);
    }
    T1Fit out;
    out.n = static_cast<int>(points.size());
    out.slope = sxy / sxx;
    out.gamma_ex = yb - out.slope * xb;
    for (const auto& p : points) {
        const double w = all_sigma ? 1.0 / (*p.sigma_inv_t1 * *p.sigma_inv_t1) : 1.0;
        const double d = p.inv_t1 - (out.gamma_ex + out.slope * p.tau_ss);
        out.chi2 += w * d * d;
    }
    const double scale = all_sigma ? 1.0 : (out.n > 2 ? out.chi2 / (out.n - 2) : 0.0);
    const double var_b = scale / sxx;
    const double var_a = scale * (1.0 / sw + xb * xb / sxx);
    out.covariance_slope_intercept = -scale * xb / sxx;
    out.g = out.slope / C;
    out.sigma_g = std::sqrt(var_b) / C;
    out.sigma_gamma_ex = std::sqrt(var_a);
    return out;
}

DecayTrace synth_trace(const FitParams& f, std::span<const double> t_grid, double noise_rel, std::uint64_t seed) {
    if (!(noise_rel >= 0.0)) throw InvalidParameterError("noise_rel must be >= 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw InvalidParameterError("t_grid must be strictly increasing");
    const CounterRng base(seed);
    DecayTrace tr;
    tr.samples.reserve(t_grid.size());
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double m = gamma_model(t_grid[k], f);
        CounterRng rk = base.split(k);
        const double eps = noise_rel > 0.0 ? noise_rel * rk.normal() : 0.0;
        TraceSample s;
        s.t = t_grid[k];
        s.gamma = m * (1.0 + eps);
        if (noise_rel > 0.0) s.sigma = m * noise_rel;
        tr.samples.push_back(s);
    }
    return tr;
}

std::vector<double> log_grid(double t0, double t1, int n) {
    if (!(t0 > 0.0) || !(t1 > t0) || n < 2) throw InvalidParameterError("log grid needs 0 < t0 < t1 and n >= 2");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double a = std::log(t0), b = std::log(t1);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
    g.front() = t0;
    g.back() = t1;
    return g;
}

std::vector<double> lin_grid(double t0, double t1, int n) {
    if (!(t1 > t0) || n < 2) throw InvalidParameterError("linear grid needs t0 < t1 and n >= 2");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = t0 + (t1 - t0) * i / (n - 1);
    g.back() = t1;
    return g;
}

}  // namespace qpdyn
