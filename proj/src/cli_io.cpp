#include "qpdyn/cli_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "qpdyn/constants.hpp"
#include "qpdyn/dynamics.hpp"
#include "qpdyn/eigenmode.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/estimates.hpp"
#include "qpdyn/geometry.hpp"
#include "qpdyn/pde_sim.hpp"
#include "qpdyn/units.hpp"
#include "qpdyn/version.hpp"

namespace qpdyn {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::pair<std::size_t, std::string_view>> numbered_lines(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string_view>> out;
    std::size_t line = 0, start = 0;
    while (start <= text.size()) {
        const auto pos = text.find('\n', start);
        const auto end = pos == std::string_view::npos ? text.size() : pos;
        ++line;
        out.emplace_back(line, text.substr(start, end - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// Value of "1 <unit>" in SI.
double unit_factor(std::string_view unit, Dim dim, std::size_t line) {
    try {
        return parse_quantity("1 " + std::string(unit), dim);
    } catch (const ParseError& e) {
        throw ParseError(e.what(), line);
    }
}

double cell_number(std::string_view cell, std::size_t line, std::string_view column) {
    try {
        return parse_number(cell);
    } catch (const ParseError&) {
        throw ParseError("column " + std::string(column) + ": not a number: '" + std::string(cell) + "'", line);
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

DecayTrace parse_trace(std::string_view text) {
    DecayTrace tr;
    double t_factor = 1.0, g_factor = 1.0;
    bool header_seen = false, with_sigma = false;
    std::size_t prev_line = 0;
    for (const auto& [line, raw] : numbered_lines(text)) {
        const auto s = trim(raw);
        if (s.empty()) continue;
        if (s.front() == '#') {
            const auto body = trim(s.substr(1));
            if (body.starts_with("units:")) {
                if (header_seen) throw ParseError("units line must precede the header", line);
                for (auto item : split(body.substr(6), ',')) {
                    if (item.empty()) continue;
                    const auto eq = item.find('=');
                    if (eq == std::string_view::npos) throw ParseError("units entry needs key=unit: '" + std::string(item) + "'", line);
                    const auto key = trim(item.substr(0, eq));
                    const auto unit = trim(item.substr(eq + 1));
                    if (key == "t") t_factor = unit_factor(unit, Dim::time, line);
                    else if (key == "gamma") g_factor = unit_factor(unit, Dim::rate, line);
                    else throw ParseError("unknown units key '" + std::string(key) + "'", line);
                }
            } else if (body.starts_with("label:")) {
                tr.label = std::string(trim(body.substr(6)));
            }
            continue;
        }
        const auto cells = split(s, ',');
        if (!header_seen) {
            if (cells.size() == 2 && cells[0] == "t" && cells[1] == "gamma") with_sigma = false;
            else if (cells.size() == 3 && cells[0] == "t" && cells[1] == "gamma" && cells[2] == "sigma") with_sigma = true;
            else throw ParseError("expected header 't,gamma' or 't,gamma,sigma', got '" + std::string(s) + "'", line);
            header_seen = true;
            continue;
        }
        const std::size_t want = with_sigma ? 3 : 2;
        if (cells.size() != want)
            throw ParseError("expected " + std::to_string(want) + " columns, got " + std::to_string(cells.size()), line);
        TraceSample smp;
        smp.t = cell_number(cells[0], line, "t") * t_factor;
        smp.gamma = cell_number(cells[1], line, "gamma") * g_factor;
        if (with_sigma) smp.sigma = cell_number(cells[2], line, "sigma") * g_factor;
        if (!std::isfinite(smp.t) || !std::isfinite(smp.gamma)) throw ParseError("non-finite value", line);
        if (!tr.samples.empty() && !(smp.t > tr.samples.back().t))
            throw ParseError("t not strictly increasing (previous sample on line " + std::to_string(prev_line) + ")", line);
        if (!(smp.gamma > 0.0)) throw ParseError("gamma must be positive", line);
        if (smp.sigma && !(*smp.sigma > 0.0)) throw ParseError("sigma must be positive", line);
        tr.samples.push_back(smp);
        prev_line = line;
    }
    if (!header_seen) throw ParseError("missing header 't,gamma[,sigma]'");
    tr.validate();
    return tr;
}

std::string format_trace(const DecayTrace& trace) {
    std::string out;
    if (!trace.label.empty()) out += "# label: " + trace.label + "\n";
    const bool sig = trace.has_sigma();
    out += sig ? "t,gamma,sigma\n" : "t,gamma\n";
    for (const auto& s : trace.samples) {
        out += format_double(s.t) + "," + format_double(s.gamma);
        if (sig) out += "," + format_double(*s.sigma);
        out += "\n";
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read error on '" + path.string() + "'");
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write error on '" + path.string() + "'");
}

DecayTrace read_trace(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return parse_trace(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_trace(const std::filesystem::path& path, const DecayTrace& trace) {
    trace.validate();
    write_text_file(path, format_trace(trace));
}

std::vector<SteadyStatePoint> parse_t1_points(std::string_view text) {
    std::vector<SteadyStatePoint> pts;
    bool header_seen = false, with_sigma = false;
    for (const auto& [line, raw] : numbered_lines(text)) {
        const auto s = trim(raw);
        if (s.empty() || s.front() == '#') continue;
        const auto cells = split(s, ',');
        if (!header_seen) {
            if (cells.size() == 2 && cells[0] == "tau_ss" && cells[1] == "inv_t1") with_sigma = false;
            else if (cells.size() == 3 && cells[0] == "tau_ss" && cells[1] == "inv_t1" && cells[2] == "sigma") with_sigma = true;
            else throw ParseError("expected header 'tau_ss,inv_t1[,sigma]', got '" + std::string(s) + "'", line);
            header_seen = true;
            continue;
        }
        const std::size_t want = with_sigma ? 3 : 2;
        if (cells.size() != want)
            throw ParseError("expected " + std::to_string(want) + " columns, got " + std::to_string(cells.size()), line);
        SteadyStatePoint p;
        p.tau_ss = cell_number(cells[0], line, "tau_ss");
        p.inv_t1 = cell_number(cells[1], line, "inv_t1");
        if (with_sigma) p.sigma_inv_t1 = cell_number(cells[2], line, "sigma");
        if (!(p.tau_ss > 0.0) || !(p.inv_t1 > 0.0)) throw ParseError("tau_ss and inv_t1 must be positive", line);
        if (p.sigma_inv_t1 && !(*p.sigma_inv_t1 > 0.0)) throw ParseError("sigma must be positive", line);
        pts.push_back(p);
    }
    if (!header_seen) throw ParseError("missing header 'tau_ss,inv_t1[,sigma]'");
    return pts;
}

std::vector<SteadyStatePoint> read_t1_points(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return parse_t1_points(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string format_t1_points(const std::vector<SteadyStatePoint>& points) {
    const bool sig = !points.empty() && std::all_of(points.begin(), points.end(),
                                                     [](const auto& p) { return p.sigma_inv_t1.has_value(); });
    std::string out = sig ? "tau_ss,inv_t1,sigma\n" : "tau_ss,inv_t1\n";
    for (const auto& p : points) {
        out += format_double(p.tau_ss) + "," + format_double(p.inv_t1);
        if (sig) out += "," + format_double(*p.sigma_inv_t1);
        out += "\n";
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

Json RunManifest::to_json() const {
    Json j;
    j["command"] = command;
    j["parameters"] = parameters;
    Json in = Json::array();
    for (const auto& f : inputs) in.push_back({{"path", f.path}, {"sha256", f.sha256}});
    j["inputs"] = in;
    j["seed"] = seed ? Json(*seed) : Json(nullptr);
    j["library_version"] = library_version;
    if (timestamp) j["timestamp"] = *timestamp;
    return j;
}

std::string render(const RunManifest& manifest, const CommandResult& result, OutputFormat format) {
    if (format == OutputFormat::json) {
        Json doc;
        doc["manifest"] = manifest.to_json();
        doc["result"] = result.json;
        return doc.dump(2) + "\n";
    }
    if (result.csv_header.empty()) throw UsageError("'" + manifest.command + "' has no CSV form; use --out json");
    std::string out = "# manifest: " + manifest.to_json().dump() + "\n";
    for (const auto& c : result.csv_comments) out += "# " + c + "\n";
    for (std::size_t i = 0; i < result.csv_header.size(); ++i) out += (i ? "," : "") + result.csv_header[i];
    out += "\n";
    for (const auto& row : result.csv_rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
        out += "\n";
    }
    return out;
}

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Parses a suffixed option value, naming the option on failure.
double quantity(const std::string& opt, const std::string& text, Dim dim) {
    try {
        return parse_quantity(text, dim);
    } catch (const ParseError& e) {
        throw ParseError(opt + ": " + e.what());
    }
}

Json rates_json(const ExtractedRates& r) {
    Json j;
    j["C"] = r.C;
    j["x_i"] = r.x_i;
    j["sigma_x_i"] = r.sigma_x_i;
    j["r"] = r.r;
    j["sigma_r"] = r.sigma_r;
    j["x0_max"] = r.x0_max;
    j["x0_capped"] = r.x0_capped;
    j["s_min"] = r.s_min;
    j["sigma_s_min"] = r.sigma_s_min;
    j["s_max"] = r.s_max;
    j["sigma_s_max"] = r.sigma_s_max;
    j["g_min"] = r.g_min;
    j["g_max"] = r.g_max;
    j["sigma_g_max"] = r.sigma_g_max;
    j["g_bound"] = r.g_bound;
    return j;
}

void rates_rows(const ExtractedRates& r, CommandResult& res) {
    auto row = [&](const char* name, double v, double s) {
        res.csv_rows.push_back({name, format_double(v), format_double(s)});
    };
    row("C", r.C, 0.0);
    row("x_i", r.x_i, r.sigma_x_i);
    row("r", r.r, r.sigma_r);
    row("x0_max", r.x0_max, 0.0);
    row("s_min", r.s_min, r.sigma_s_min);
    row("s_max", r.s_max, r.sigma_s_max);
    row("g_min", r.g_min, 0.0);
    row("g_max", r.g_max, r.sigma_g_max);
    row("g_bound", r.g_bound, 0.0);
}

Json mode_json(const ModeSolution& m) {
    Json j;
    j["z"] = m.z;
    j["s"] = m.s;
    j["bracket"] = {m.bracket_lo, m.bracket_hi};
    j["residual_at_root"] = m.residual_at_root;
    j["residual_scale"] = m.residual_scale;
    j["evaluations"] = m.evaluations;
    j["branch_note"] = m.branch_note;
    return j;
}

Json geometry_json(const DeviceGeometry& g, const DerivedGeometry& d) {
    Json j;
    j["label"] = g.label;
    j["example_only"] = g.example_only;
    j["w_wire"] = g.w_wire;
    j["l_wire"] = g.l_wire;
    j["h_cap"] = g.h_cap;
    j["l_half_gap"] = g.l_half_gap;
    j["w_cap"] = g.w_cap;
    j["l_cap"] = g.l_cap;
    j["s_pad"] = g.s_pad;
    j["a_w"] = d.a_w;
    j["a_c"] = d.a_c;
    j["a_total"] = d.a_total;
    j["aspect_a"] = d.aspect_a;
    j["tau_d"] = d.tau_d;
    return j;
}

constexpr const char* exit_code_help =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected internal error\n"
    "  2  usage error (unknown flag, missing or conflicting options)\n"
    "  3  I/O error (missing or unwritable file)\n"
    "  4  parse error (malformed CSV, config or quantity)\n"
    "  5  invalid parameter (out-of-domain value, invalid geometry, negative implied rate)\n"
    "  6  numerical failure (no convergence, no root, step underflow)\n"
    "  7  insufficient data (too few points, degenerate trace, too little spread)\n";

// Option storage. Quantities are kept as text and parsed with their dimension.
struct Options {
    std::string out_format = "json";
    std::string out_path;
    bool no_timestamp = false;
    int threads = 0;

    // fit / t1fit
    std::string input;
    std::string tmin = "200us";
    std::string weighting;
    std::string c, omega, delta;

    // rates
    std::string amplitude, rprime, tauss, gamma0;

    // geometry, vortices, transport
    std::string geom;
    int nl = 0, nr = 0;
    std::string p, d, s0 = "0/s";
    std::string form = "full";

    // steps / sweep
    std::string series = "alternating";
    int max_steps = 4;
    std::string bk, slope, bmin, bmax;
    int points = 0;
    std::string mapping = "equal";

    // pde
    int resolution = 50;
    std::string r, g = "0/s", tinj = "0us", amp = "0/s", injection = "source";
    std::string tmax, xinit = "0", tol = "1e-6";
    int evolve_points = 201;

    // synth
    std::string params, noise = "0", tgrid, label;
    std::uint64_t seed = 0;

    // estimate
    std::string rj, qin, qout, qw = "inf", qj;
    std::string rcore, taun;
    std::string gamma, xqp, factor = "1";
    std::string rho, rc;
};

class Runner {
public:
    Runner(const Options& o, RunManifest& m) : o_(o), m_(m) {}

    double q(const char* opt, const std::string& text, Dim dim, const char* key) {
        const double v = quantity(opt, text, dim);
        m_.parameters[key] = v;
        return v;
    }
    double num(const char* opt, const std::string& text, const char* key) {
        double v = 0.0;
        try {
            v = parse_number(text);
        } catch (const ParseError& e) {
            throw ParseError(std::string(opt) + ": " + e.what());
        }
        m_.parameters[key] = v;
        return v;
    }
    std::string input(const std::string& path) {
        const auto text = read_text_file(path);
        m_.inputs.push_back({path, sha256_hex(text)});
        return text;
    }

    double coupling() {
        if (!o_.c.empty()) {
            if (!o_.omega.empty() || !o_.delta.empty()) throw UsageError("--c excludes --omega and --delta");
            return q("--c", o_.c, Dim::rate, "C");
        }
        QubitParams qp = default_qubit();
        if (!o_.omega.empty()) qp.omega_q = quantity("--omega", o_.omega, Dim::angular_frequency);
        if (!o_.delta.empty()) qp.delta_gap = quantity("--delta", o_.delta, Dim::energy);
        m_.parameters["omega_q"] = qp.omega_q;
        m_.parameters["delta_gap"] = qp.delta_gap;
        const double C = qp_coupling_constant(qp);
        m_.parameters["C"] = C;
        return C;
    }

    DeviceGeometry geometry() {
        if (o_.geom.empty()) throw UsageError("--geom is required");
        const auto text = input(o_.geom);
        try {
            return parse_geometry(text);
        } catch (const ParseError& e) {
            throw ParseError(o_.geom + ": " + e.what());
        }
    }

    TransportParams transport() {
        TransportParams tp;
        tp.D = q("--d", need("--d", o_.d), Dim::diffusivity, "D");
        tp.s0 = q("--s0", o_.s0, Dim::rate, "s0");
        return tp;
    }

    VortexConfig vortices() {
        VortexConfig v;
        v.n_left = o_.nl;
        v.n_right = o_.nr;
        m_.parameters["n_left"] = v.n_left;
        m_.parameters["n_right"] = v.n_right;
        v.trapping_power = q("--p", need("--p", o_.p), Dim::diffusivity, "P");
        return v;
    }

    EigenForm eigen_form() {
        const EigenForm f = parse_form(o_.form);
        m_.parameters["form"] = std::string(form_name(f));
        return f;
    }

    static const std::string& need(const char* opt, const std::string& v) {
        if (v.empty()) throw UsageError(std::string(opt) + " is required");
        return v;
    }

    CommandResult fit() {
        DecayTrace tr = read_trace_input();
        FitOptions fo;
        fo.t_min = q("--tmin", o_.tmin, Dim::time, "t_min");
        fo.weighting = o_.weighting.empty() ? (tr.has_sigma() ? Weighting::sigma : Weighting::relative)
                                            : parse_weighting(o_.weighting);
        m_.parameters["weighting"] = std::string(weighting_name(fo.weighting));
        const double C = coupling();
        const FitResult f = fit_gamma_trace(tr, fo);
        const ExtractedRates er = extract_rates(f, C);

        CommandResult res;
        Json& j = res.json;
        j["label"] = tr.label;
        j["amplitude"] = f.amplitude;
        j["r_prime"] = f.r_prime;
        j["tau_ss"] = f.tau_ss;
        j["gamma0"] = f.gamma0;
        j["sigma"] = {{"amplitude", f.sigma(0)}, {"r_prime", f.sigma(1)}, {"tau_ss", f.sigma(2)}, {"gamma0", f.sigma(3)}};
        Json cov = Json::array();
        for (int i = 0; i < 4; ++i) {
            Json row = Json::array();
            for (int k = 0; k < 4; ++k) row.push_back(f.covariance[static_cast<std::size_t>(4 * i + k)]);
            cov.push_back(row);
        }
        j["covariance"] = cov;
        j["residual_norm"] = f.residual_norm;
        j["n_used"] = f.n_used;
        j["t_min_applied"] = f.t_min_applied;
        j["iterations"] = f.iterations;
        j["weighting"] = std::string(weighting_name(f.weighting));
        j["warnings"] = f.warnings;
        j["rates"] = rates_json(er);

        res.csv_header = {"quantity", "value", "sigma"};
        res.csv_rows.push_back({"amplitude", format_double(f.amplitude), format_double(f.sigma(0))});
        res.csv_rows.push_back({"r_prime", format_double(f.r_prime), format_double(f.sigma(1))});
        res.csv_rows.push_back({"tau_ss", format_double(f.tau_ss), format_double(f.sigma(2))});
        res.csv_rows.push_back({"gamma0", format_double(f.gamma0), format_double(f.sigma(3))});
        rates_rows(er, res);
        return res;
    }

    CommandResult rates() {
        FitResult f;
        f.amplitude = q("--amplitude", need("--amplitude", o_.amplitude), Dim::rate, "amplitude");
        f.r_prime = num("--rprime", need("--rprime", o_.rprime), "r_prime");
        f.tau_ss = q("--tauss", need("--tauss", o_.tauss), Dim::time, "tau_ss");
        f.gamma0 = q("--gamma0", need("--gamma0", o_.gamma0), Dim::rate, "gamma0");
        const double C = coupling();
        const ExtractedRates er = extract_rates(f, C);
        CommandResult res;
        res.json = rates_json(er);
        res.csv_header = {"quantity", "value", "sigma"};
        rates_rows(er, res);
        return res;
    }

    CommandResult eigenrate() {
        const DeviceGeometry g = geometry();
        const VortexConfig v = vortices();
        const TransportParams tp = transport();
        const EigenForm form = eigen_form();
        const ModeSolution m = smallest_root(g, v, tp, form);
        const DerivedGeometry dg = derive(g, tp.D);
        CommandResult res;
        res.json = mode_json(m);
        res.json["small_p_rate"] = small_p_rate(g, v, tp);
        res.json["large_p_z"] = large_p_z(g);
        res.json["trapping_sa"] = (m.s - tp.s0) * dg.a_total;
        res.json["geometry"] = geometry_json(g, dg);
        res.csv_header = {"n_left", "n_right", "z", "s_per_s", "sA_cm2_per_s", "small_p_s_per_s"};
        res.csv_rows.push_back({std::to_string(v.n_left), std::to_string(v.n_right), format_double(m.z), format_double(m.s),
                                format_double((m.s - tp.s0) * dg.a_total / units::cm2_per_s),
                                format_double(small_p_rate(g, v, tp))});
        return res;
    }

    CommandResult steps() {
        const DeviceGeometry g = geometry();
        const TransportParams tp = transport();
        const double P = q("--p", need("--p", o_.p), Dim::diffusivity, "P");
        const VortexSeries series = parse_series(o_.series);
        m_.parameters["series"] = std::string(series_name(series));
        if (o_.max_steps < 0) throw InvalidParameterError("--max must be >= 0");
        m_.parameters["max_steps"] = o_.max_steps;
        const EigenForm form = eigen_form();
        const auto seq = step_sequence(g, tp, P, series, o_.max_steps, form, o_.threads);

        CommandResult res;
        Json rows = Json::array();
        res.csv_header = {"step", "n_left", "n_right", "s_per_s", "sA_cm2_per_s", "increment_cm2_per_s"};
        for (std::size_t k = 0; k < seq.size(); ++k) {
            const auto& e = seq[k];
            const double inc = k == 0 ? 0.0 : e.trapping_sa - seq[k - 1].trapping_sa;
            rows.push_back({{"step", k}, {"n_left", e.n_left}, {"n_right", e.n_right}, {"s", e.s},
                            {"trapping_sa", e.trapping_sa}, {"increment", inc}});
            res.csv_rows.push_back({std::to_string(k), std::to_string(e.n_left), std::to_string(e.n_right),
                                    format_double(e.s), format_double(e.trapping_sa / units::cm2_per_s),
                                    format_double(inc / units::cm2_per_s)});
        }
        res.json["a_total"] = derive(g, tp.D).a_total;
        res.json["steps"] = rows;
        return res;
    }

    CommandResult sweep() {
        const DeviceGeometry g = geometry();
        const TransportParams tp = transport();
        const double P = q("--p", need("--p", o_.p), Dim::diffusivity, "P");
        const double bk = q("--bk", need("--bk", o_.bk), Dim::field, "b_k");
        const double slope = q("--slope", need("--slope", o_.slope), Dim::inverse_field, "slope");
        const double bmin = q("--bmin", need("--bmin", o_.bmin), Dim::field, "b_min");
        const double bmax = q("--bmax", need("--bmax", o_.bmax), Dim::field, "b_max");
        if (o_.points < 2) throw InvalidParameterError("--points must be >= 2");
        if (!(bmax > bmin)) throw InvalidParameterError("--bmax must exceed --bmin");
        m_.parameters["points"] = o_.points;
        const SweepMapping mapping = parse_mapping(o_.mapping);
        m_.parameters["mapping"] = std::string(mapping_name(mapping));
        const EigenForm form = eigen_form();
        std::vector<double> grid(static_cast<std::size_t>(o_.points));
        for (int i = 0; i < o_.points; ++i)
            grid[static_cast<std::size_t>(i)] = i == o_.points - 1 ? bmax : bmin + (bmax - bmin) * i / (o_.points - 1);
        const auto pts = field_sweep(g, tp, P, grid, bk, slope, mapping, form, o_.threads);

        CommandResult res;
        Json rows = Json::array();
        res.csv_header = {"b_mG", "n_left", "n_right", "s_per_s", "sA_cm2_per_s"};
        for (const auto& p : pts) {
            rows.push_back({{"b", p.b}, {"n_left", p.n_left}, {"n_right", p.n_right}, {"s", p.s}, {"trapping_sa", p.trapping_sa}});
            res.csv_rows.push_back({format_double(p.b / units::mG), std::to_string(p.n_left), std::to_string(p.n_right),
                                    format_double(p.s), format_double(p.trapping_sa / units::cm2_per_s)});
        }
        res.json["points"] = rows;
        return res;
    }

    Discretization discretize() {
        const DeviceGeometry g = geometry();
        const VortexConfig v = vortices();
        const TransportParams tp = transport();
        m_.parameters["resolution"] = o_.resolution;
        return build(g, v, tp, o_.resolution);
    }

    CommandResult pde_eigen() {
        const Discretization disc = discretize();
        const SlowestMode sm = slowest_mode(disc);
        const ModeSolution root = smallest_root(disc.geom, disc.vortices, disc.tp, EigenForm::full);
        CommandResult res;
        res.json["s"] = sm.s;
        res.json["iterations"] = sm.iterations;
        res.json["n_nodes"] = disc.n_nodes;
        res.json["s_root"] = root.s;
        res.json["relative_difference"] = root.s != 0.0 ? (sm.s - root.s) / root.s : sm.s - root.s;
        res.csv_header = {"resolution", "n_nodes", "s_per_s", "s_root_per_s"};
        res.csv_rows.push_back({std::to_string(o_.resolution), std::to_string(disc.n_nodes), format_double(sm.s),
                                format_double(root.s)});
        return res;
    }

    CommandResult pde_evolve() {
        const Discretization disc = discretize();
        EvolveSpec spec;
        spec.r = q("--r", need("--r", o_.r), Dim::rate, "r");
        spec.g = q("--g", o_.g, Dim::rate, "g");
        spec.injection.mode = parse_injection_mode(o_.injection);
        m_.parameters["injection"] = std::string(injection_mode_name(spec.injection.mode));
        spec.injection.t_inj = q("--tinj", o_.tinj, Dim::time, "t_inj");
        spec.injection.amplitude = spec.injection.mode == InjectionMode::source
                                       ? q("--amp", o_.amp, Dim::rate, "amplitude")
                                       : num("--amp", o_.amp, "amplitude");
        spec.tolerance = num("--tol", o_.tol, "tolerance");
        const double x0 = num("--xinit", o_.xinit, "x_init");
        if (x0 != 0.0) spec.x_init.assign(static_cast<std::size_t>(disc.n_nodes), x0);
        const double tmax = q("--tmax", need("--tmax", o_.tmax), Dim::time, "t_max");
        if (o_.evolve_points < 2) throw InvalidParameterError("--points must be >= 2");
        m_.parameters["points"] = o_.evolve_points;
        spec.t_grid = lin_grid(0.0, tmax, o_.evolve_points);
        const EvolveResult ev = evolve(disc, spec);

        CommandResult res;
        res.json["n_nodes"] = disc.n_nodes;
        res.json["steps"] = ev.steps;
        res.json["rejected"] = ev.rejected;
        res.json["t"] = ev.t;
        res.json["x_junction"] = ev.x_junction;
        res.json["number"] = ev.number;
        res.csv_header = {"t_s", "x_junction", "number_m2"};
        for (std::size_t k = 0; k < ev.t.size(); ++k)
            res.csv_rows.push_back({format_double(ev.t[k]), format_double(ev.x_junction[k]), format_double(ev.number[k])});
        return res;
    }

    CommandResult synth() {
        FitParams f;
        bool seen[4] = {false, false, false, false};
        for (auto item : split(need("--params", o_.params), ',')) {
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) throw UsageError("--params entries are key=value, got '" + std::string(item) + "'");
            const auto key = trim(item.substr(0, eq));
            const std::string val(trim(item.substr(eq + 1)));
            if (key == "amplitude") f.amplitude = quantity("--params amplitude", val, Dim::rate), seen[0] = true;
            else if (key == "rprime") f.r_prime = parse_number(val), seen[1] = true;
            else if (key == "tauss") f.tau_ss = quantity("--params tauss", val, Dim::time), seen[2] = true;
            else if (key == "gamma0") f.gamma0 = quantity("--params gamma0", val, Dim::rate), seen[3] = true;
            else throw UsageError("unknown --params key '" + std::string(key) + "' (amplitude, rprime, tauss, gamma0)");
        }
        if (!(seen[0] && seen[1] && seen[2] && seen[3]))
            throw UsageError("--params needs amplitude, rprime, tauss and gamma0");
        if (!(f.amplitude >= 0.0) || !(f.r_prime >= 0.0 && f.r_prime < 1.0) || !(f.tau_ss > 0.0) || !(f.gamma0 >= 0.0))
            throw InvalidParameterError("need amplitude >= 0, 0 <= rprime < 1, tauss > 0, gamma0 >= 0");
        m_.parameters["amplitude"] = f.amplitude;
        m_.parameters["r_prime"] = f.r_prime;
        m_.parameters["tau_ss"] = f.tau_ss;
        m_.parameters["gamma0"] = f.gamma0;
        const double noise = num("--noise", o_.noise, "noise_rel");
        m_.seed = o_.seed;
        const auto grid = time_grid(need("--tgrid", o_.tgrid));
        DecayTrace tr = synth_trace(f, grid, noise, o_.seed);
        tr.label = o_.label;
        m_.parameters["label"] = o_.label;

        CommandResult res;
        res.json["label"] = tr.label;
        if (!tr.label.empty()) res.csv_comments.push_back("label: " + tr.label);
        Json samples = Json::array();
        const bool sig = tr.has_sigma();
        res.csv_header = sig ? std::vector<std::string>{"t", "gamma", "sigma"} : std::vector<std::string>{"t", "gamma"};
        for (const auto& s : tr.samples) {
            Json js = {{"t", s.t}, {"gamma", s.gamma}};
            std::vector<std::string> row{format_double(s.t), format_double(s.gamma)};
            if (sig) {
                js["sigma"] = *s.sigma;
                row.push_back(format_double(*s.sigma));
            }
            samples.push_back(js);
            res.csv_rows.push_back(row);
        }
        res.json["samples"] = samples;
        return res;
    }

    // "log:<t0>:<t1>:<n>" or "lin:<t0>:<t1>:<n>"
    std::vector<double> time_grid(const std::string& spec) {
        const auto parts = split(spec, ':');
        if (parts.size() != 4 || (parts[0] != "log" && parts[0] != "lin"))
            throw UsageError("--tgrid must be log:<t0>:<t1>:<n> or lin:<t0>:<t1>:<n>");
        const double t0 = quantity("--tgrid", std::string(parts[1]), Dim::time);
        const double t1 = quantity("--tgrid", std::string(parts[2]), Dim::time);
        const double nd = parse_number(parts[3]);
        if (nd != std::floor(nd) || nd < 2 || nd > 1e7) throw InvalidParameterError("--tgrid point count must be an integer >= 2");
        m_.parameters["t_grid"] = {{"kind", std::string(parts[0])}, {"t0", t0}, {"t1", t1}, {"n", static_cast<int>(nd)}};
        return parts[0] == "log" ? log_grid(t0, t1, static_cast<int>(nd)) : lin_grid(t0, t1, static_cast<int>(nd));
    }

    CommandResult t1fit() {
        const auto text = input(need("<points.csv>", o_.input));
        std::vector<SteadyStatePoint> pts;
        try {
            pts = parse_t1_points(text);
        } catch (const ParseError& e) {
            throw ParseError(o_.input + ": " + e.what());
        }
        const double C = coupling();
        const T1Fit f = fit_t1_vs_tau(pts, C);
        CommandResult res;
        res.json["g"] = f.g;
        res.json["sigma_g"] = f.sigma_g;
        res.json["gamma_ex"] = f.gamma_ex;
        res.json["sigma_gamma_ex"] = f.sigma_gamma_ex;
        res.json["slope"] = f.slope;
        res.json["covariance_slope_intercept"] = f.covariance_slope_intercept;
        res.json["chi2"] = f.chi2;
        res.json["n"] = f.n;
        res.csv_header = {"quantity", "value", "sigma"};
        res.csv_rows.push_back({"g", format_double(f.g), format_double(f.sigma_g)});
        res.csv_rows.push_back({"gamma_ex", format_double(f.gamma_ex), format_double(f.sigma_gamma_ex)});
        return res;
    }

    double gap() {
        const double d = o_.delta.empty() ? default_qubit().delta_gap : quantity("--delta", o_.delta, Dim::energy);
        m_.parameters["delta_gap"] = d;
        return d;
    }

    CommandResult est_injection() {
        const double rj = q("--rj", need("--rj", o_.rj), Dim::resistance, "r_j");
        const double d = gap();
        CavityQs qs;
        qs.q_in = num("--qin", need("--qin", o_.qin), "q_in");
        qs.q_out = num("--qout", need("--qout", o_.qout), "q_out");
        qs.q_w = num("--qw", o_.qw, "q_w");
        qs.q_j = num("--qj", need("--qj", o_.qj), "q_j");
        const double p = injection_power(rj, d, qs);
        CommandResult res;
        res.json["p_junction_w"] = junction_power(rj, d);
        res.json["q_tot"] = qs.q_tot();
        res.json["p_in_w"] = p;
        res.json["p_in_dbm"] = watts_to_dbm(p);
        res.csv_header = {"p_junction_w", "q_tot", "p_in_w", "p_in_dbm"};
        res.csv_rows.push_back({format_double(junction_power(rj, d)), format_double(qs.q_tot()), format_double(p),
                                format_double(watts_to_dbm(p))});
        return res;
    }

    CommandResult est_qprate() {
        const double rj = q("--rj", need("--rj", o_.rj), Dim::resistance, "r_j");
        const double G = qp_injection_rate(rj, gap());
        CommandResult res;
        res.json["rate_per_s"] = G;
        res.json["rate_per_us"] = G * units::us;
        res.csv_header = {"rate_per_s", "rate_per_us"};
        res.csv_rows.push_back({format_double(G), format_double(G * units::us)});
        return res;
    }

    CommandResult est_trapping() {
        VortexMicro v;
        v.r_core = q("--rcore", need("--rcore", o_.rcore), Dim::length, "r_core");
        v.tau_n = q("--taun", need("--taun", o_.taun), Dim::time, "tau_n");
        const double P = microscopic_trapping_power(v);
        CommandResult res;
        res.json["p_m2_per_s"] = P;
        res.json["p_cm2_per_s"] = P / units::cm2_per_s;
        res.csv_header = {"p_m2_per_s", "p_cm2_per_s"};
        res.csv_rows.push_back({format_double(P), format_double(P / units::cm2_per_s)});
        return res;
    }

    CommandResult est_freqshift() {
        const double omega = o_.omega.empty() ? default_qubit().omega_q : quantity("--omega", o_.omega, Dim::angular_frequency);
        m_.parameters["omega_q"] = omega;
        const double d = gap();
        const double factor = num("--factor", o_.factor, "empirical_factor");
        if (o_.gamma.empty() == o_.xqp.empty()) throw UsageError("give exactly one of --gamma and --xqp");
        CommandResult res;
        double dw = 0.0;
        if (!o_.gamma.empty()) {
            const double gm = q("--gamma", o_.gamma, Dim::rate, "gamma");
            dw = frequency_shift(gm, omega, d, factor);
            res.json["ratio_to_gamma"] = gm > 0.0 ? dw / gm : frequency_shift(1.0, omega, d, factor);
        } else {
            const double x = num("--xqp", o_.xqp, "x_qp");
            dw = frequency_shift_from_xqp(x, omega, d, factor);
            res.json["relative_shift"] = dw / omega;
        }
        res.json["delta_omega_rad_per_s"] = dw;
        res.json["delta_f_hz"] = dw / (2.0 * std::numbers::pi);
        res.csv_header = {"delta_omega_rad_per_s", "delta_f_hz"};
        res.csv_rows.push_back({format_double(dw), format_double(dw / (2.0 * std::numbers::pi))});
        return res;
    }

    CommandResult est_profile() {
        const double rho = q("--rho", need("--rho", o_.rho), Dim::length, "rho");
        const double P = q("--p", need("--p", o_.p), Dim::diffusivity, "P");
        const double D = q("--d", need("--d", o_.d), Dim::diffusivity, "D");
        const double rc = q("--rc", need("--rc", o_.rc), Dim::length, "r_c");
        const ProfileValue v = vortex_profile(rho, P, D, rc);
        CommandResult res;
        res.json["ratio"] = v.ratio;
        res.json["inside_core"] = v.inside_core;
        res.json["weak_trap"] = v.weak_trap;
        res.csv_header = {"ratio", "inside_core", "weak_trap"};
        res.csv_rows.push_back({format_double(v.ratio), v.inside_core ? "true" : "false", v.weak_trap ? "true" : "false"});
        return res;
    }

private:
    DecayTrace read_trace_input() {
        const auto text = input(need("<trace.csv>", o_.input));
        try {
            return parse_trace(text);
        } catch (const ParseError& e) {
            throw ParseError(o_.input + ": " + e.what());
        }
    }

    const Options& o_;
    RunManifest& m_;
};

void add_geometry_options(CLI::App* sub, Options& o, bool with_vortices) {
    sub->add_option("--geom", o.geom, "geometry config file")->required();
    if (with_vortices) {
        sub->add_option("--nl", o.nl, "vortices in the left pad")->check(CLI::NonNegativeNumber);
        sub->add_option("--nr", o.nr, "vortices in the right pad")->check(CLI::NonNegativeNumber);
    }
    sub->add_option("--p", o.p, "trapping power per vortex, e.g. 0.067cm2/s")->required();
    sub->add_option("--d", o.d, "diffusion constant, e.g. 18cm2/s")->required();
    sub->add_option("--s0", o.s0, "background trapping rate (default 0/s)");
}

void add_coupling_options(CLI::App* sub, Options& o) {
    sub->add_option("--c", o.c, "decay rate per unit x_qp, e.g. 4.6e10/s");
    sub->add_option("--omega", o.omega, "qubit frequency, e.g. 6GHz (default 6GHz)");
    sub->add_option("--delta", o.delta, "superconducting gap, e.g. 180ueV (default 180ueV)");
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Quasiparticle dynamics: trace fitting, trapping eigenmodes and diffusion simulation", "qpdyn"};
    app.footer(std::string("Quantities take unit suffixes (18ms, 0.067cm2/s, 180ueV, 6GHz, 1/170ns);\n"
                           "bare numbers are rejected for dimensional options.\n\n") +
               exit_code_help);
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(library_version));
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out_format, "output format: json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("-o,--output", o.out_path, "write the result to this file instead of stdout");
        sub->add_flag("--no-timestamp", o.no_timestamp, "omit the manifest timestamp");
        sub->footer(exit_code_help);
    };

    auto* fit = app.add_subcommand("fit", "fit a decay trace and extract rates");
    fit->add_option("trace", o.input, "trace CSV (t,gamma[,sigma])")->required();
    fit->add_option("--tmin", o.tmin, "ignore samples before this time (default 200us)");
    fit->add_option("--weighting", o.weighting, "relative|absolute|sigma (default: sigma when the file has it)");
    add_coupling_options(fit, o);
    add_common(fit);

    auto* rates = app.add_subcommand("rates", "rates and bounds from given shape parameters");
    rates->add_option("--amplitude", o.amplitude, "A = C x_i, e.g. 3.9e6/s")->required();
    rates->add_option("--rprime", o.rprime, "r'")->required();
    rates->add_option("--tauss", o.tauss, "tau_ss, e.g. 18ms")->required();
    rates->add_option("--gamma0", o.gamma0, "Gamma0, e.g. 1/9.5us")->required();
    add_coupling_options(rates, o);
    add_common(rates);

    auto* eig = app.add_subcommand("eigenrate", "slowest trapping mode from the transcendental equation");
    add_geometry_options(eig, o, true);
    eig->add_option("--form", o.form, "reduced|full (default full)");
    add_common(eig);

    auto* steps = app.add_subcommand("steps", "decay rate versus vortex count");
    add_geometry_options(steps, o, false);
    steps->add_option("--series", o.series, "alternating|pairs (default alternating)");
    steps->add_option("--max", o.max_steps, "number of steps (default 4)");
    steps->add_option("--form", o.form, "reduced|full (default full)");
    steps->add_option("--threads", o.threads, "worker threads, 0 for all cores");
    add_common(steps);

    auto* sweep = app.add_subcommand("sweep", "decay rate versus cooling field");
    add_geometry_options(sweep, o, false);
    sweep->add_option("--bk", o.bk, "field at which vortices first enter, e.g. 20mG")->required();
    sweep->add_option("--slope", o.slope, "vortices per pad per field, e.g. 0.1/mG")->required();
    sweep->add_option("--bmin", o.bmin, "first field, e.g. 0mG")->required();
    sweep->add_option("--bmax", o.bmax, "last field, e.g. 200mG")->required();
    sweep->add_option("--points", o.points, "number of field points")->required();
    sweep->add_option("--mapping", o.mapping, "equal|alternating (default equal)");
    sweep->add_option("--form", o.form, "reduced|full (default full)");
    sweep->add_option("--threads", o.threads, "worker threads, 0 for all cores");
    add_common(sweep);

    auto* pde = app.add_subcommand("pde", "finite-volume simulation on the device network");
    pde->require_subcommand(1);
    auto* pde_eig = pde->add_subcommand("eigen", "slowest mode of the discretized operator");
    add_geometry_options(pde_eig, o, true);
    pde_eig->add_option("--resolution", o.resolution, "cells per wire length L (default 50)");
    add_common(pde_eig);
    auto* pde_ev = pde->add_subcommand("evolve", "junction density after injection");
    add_geometry_options(pde_ev, o, true);
    pde_ev->add_option("--resolution", o.resolution, "cells per wire length L (default 50)");
    pde_ev->add_option("--r", o.r, "recombination rate, e.g. 1/170ns")->required();
    pde_ev->add_option("--g", o.g, "generation rate (default 0/s)");
    pde_ev->add_option("--tinj", o.tinj, "injection duration (default 0us)");
    pde_ev->add_option("--amp", o.amp, "source: device-averaged injection rate (/s); fixed: junction density");
    pde_ev->add_option("--injection", o.injection, "source|fixed (default source)");
    pde_ev->add_option("--xinit", o.xinit, "uniform initial density (default 0)");
    pde_ev->add_option("--tmax", o.tmax, "end time, e.g. 10ms")->required();
    pde_ev->add_option("--points", o.evolve_points, "output points on [0, tmax] (default 201)");
    pde_ev->add_option("--tol", o.tol, "step-doubling tolerance (default 1e-6)");
    add_common(pde_ev);

    auto* synth = app.add_subcommand("synth", "synthetic decay trace");
    synth->add_option("--params", o.params, "amplitude=<rate>,rprime=<x>,tauss=<time>,gamma0=<rate>")->required();
    synth->add_option("--noise", o.noise, "relative Gaussian noise (default 0)");
    synth->add_option("--seed", o.seed, "random seed (default 0)");
    synth->add_option("--tgrid", o.tgrid, "log:<t0>:<t1>:<n> or lin:<t0>:<t1>:<n>")->required();
    synth->add_option("--label", o.label, "trace label");
    add_common(synth);

    auto* est = app.add_subcommand("estimate", "order-of-magnitude estimators");
    est->require_subcommand(1);
    auto* est_inj = est->add_subcommand("injection", "microwave power reaching the junction");
    est_inj->add_option("--rj", o.rj, "junction normal resistance, e.g. 9.5kOhm")->required();
    est_inj->add_option("--delta", o.delta, "gap (default 180ueV)");
    est_inj->add_option("--qin", o.qin, "input coupling Q")->required();
    est_inj->add_option("--qout", o.qout, "output coupling Q")->required();
    est_inj->add_option("--qw", o.qw, "wall loss Q (default inf)");
    est_inj->add_option("--qj", o.qj, "junction loss Q")->required();
    add_common(est_inj);
    auto* est_qp = est->add_subcommand("qprate", "quasiparticle injection rate at V = 2 Delta / e");
    est_qp->add_option("--rj", o.rj, "junction normal resistance")->required();
    est_qp->add_option("--delta", o.delta, "gap (default 180ueV)");
    add_common(est_qp);
    auto* est_tp = est->add_subcommand("trapping-power", "trapping power from core size and relaxation time");
    est_tp->add_option("--rcore", o.rcore, "core radius, e.g. 100nm")->required();
    est_tp->add_option("--taun", o.taun, "relaxation time in the core, e.g. 8ns")->required();
    add_common(est_tp);
    auto* est_fs = est->add_subcommand("freqshift", "qubit frequency shift from quasiparticles");
    est_fs->add_option("--omega", o.omega, "qubit frequency (default 6GHz)");
    est_fs->add_option("--delta", o.delta, "gap (default 180ueV)");
    est_fs->add_option("--gamma", o.gamma, "quasiparticle decay rate");
    est_fs->add_option("--xqp", o.xqp, "normalized density");
    est_fs->add_option("--factor", o.factor, "divide the theory by this factor (default 1)");
    add_common(est_fs);
    auto* est_vp = est->add_subcommand("vortex-profile", "density enhancement near a vortex");
    est_vp->add_option("--rho", o.rho, "distance from the vortex centre")->required();
    est_vp->add_option("--p", o.p, "trapping power")->required();
    est_vp->add_option("--d", o.d, "diffusion constant")->required();
    est_vp->add_option("--rc", o.rc, "core radius")->required();
    add_common(est_vp);

    auto* t1 = app.add_subcommand("t1fit", "g and excess decay rate from 1/T1 versus tau_ss");
    t1->add_option("points", o.input, "CSV with tau_ss,inv_t1[,sigma] in SI units")->required();
    add_coupling_options(t1, o);
    add_common(t1);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        // Help for the innermost selected subcommand.
        const CLI::App* target = &app;
        while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
        out << target->help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << library_version << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "run with --help for usage\n";
        return static_cast<int>(ErrorKind::usage);
    }

    RunManifest manifest;
    manifest.library_version = library_version;
    if (!o.no_timestamp) manifest.timestamp = utc_timestamp();
    Runner run(o, manifest);
    try {
        CommandResult res;
        if (fit->parsed()) manifest.command = "fit", res = run.fit();
        else if (rates->parsed()) manifest.command = "rates", res = run.rates();
        else if (eig->parsed()) manifest.command = "eigenrate", res = run.eigenrate();
        else if (steps->parsed()) manifest.command = "steps", res = run.steps();
        else if (sweep->parsed()) manifest.command = "sweep", res = run.sweep();
        else if (pde_eig->parsed()) manifest.command = "pde eigen", res = run.pde_eigen();
        else if (pde_ev->parsed()) manifest.command = "pde evolve", res = run.pde_evolve();
        else if (synth->parsed()) manifest.command = "synth", res = run.synth();
        else if (est_inj->parsed()) manifest.command = "estimate injection", res = run.est_injection();
        else if (est_qp->parsed()) manifest.command = "estimate qprate", res = run.est_qprate();
        else if (est_tp->parsed()) manifest.command = "estimate trapping-power", res = run.est_trapping();
        else if (est_fs->parsed()) manifest.command = "estimate freqshift", res = run.est_freqshift();
        else if (est_vp->parsed()) manifest.command = "estimate vortex-profile", res = run.est_profile();
        else if (t1->parsed()) manifest.command = "t1fit", res = run.t1fit();
        else throw UsageError("no subcommand selected");

        const std::string text = render(manifest, res, o.out_format == "csv" ? OutputFormat::csv : OutputFormat::json);
        if (o.out_path.empty()) out << text;
        else write_text_file(o.out_path, text);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace qpdyn
