#include "qpdyn/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "qpdyn/errors.hpp"
#include "qpdyn/units.hpp"

namespace qpdyn {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

}  // namespace

std::vector<std::string> geometry_violations(const DeviceGeometry& g) {
    std::vector<std::string> p;
    if (!positive(g.w_wire)) p.push_back("w_wire must be positive");
    if (!positive(g.l_wire)) p.push_back("l_wire must be positive");
    if (!positive(g.h_cap)) p.push_back("h_cap must be positive");
    if (!positive(g.l_half_gap)) p.push_back("l_half_gap must be positive");
    if (!(g.l_cap >= 0.0) || !std::isfinite(g.l_cap)) p.push_back("l_cap must be >= 0");
    if (!positive(g.w_cap)) p.push_back("w_cap must be positive");
    if (!positive(g.s_pad)) p.push_back("s_pad must be positive");
    return p;
}

std::vector<std::string> geometry_warnings(const DeviceGeometry& g) {
    std::vector<std::string> w;
    if (!geometry_violations(g).empty()) return w;
    if (g.w_wire / g.l_wire >= 0.2) w.push_back("w_wire / l_wire >= 0.2: thin-wire model is questionable");
    if (g.l_half_gap >= g.l_wire) w.push_back("l_half_gap is not small compared with l_wire");
    if (g.l_half_gap >= g.h_cap) w.push_back("l_half_gap is not small compared with h_cap");
    return w;
}

void validate(const DeviceGeometry& g) {
    auto p = geometry_violations(g);
    if (!p.empty()) throw InvalidGeometryError(std::move(p));
}

DerivedGeometry derive(const DeviceGeometry& g, double D) {
    auto p = geometry_violations(g);
    if (!positive(D)) p.push_back("diffusion constant D must be positive");
    if (!p.empty()) throw InvalidGeometryError(std::move(p));
    DerivedGeometry d;
    d.a_w = g.l_wire * g.w_wire;
    d.a_c = 2.0 * (g.l_cap * g.w_cap + g.h_cap * g.w_wire);
    d.a_total = 2.0 * g.s_pad + 2.0 * d.a_w + 2.0 * d.a_c + 2.0 * g.l_half_gap * g.w_wire;
    d.aspect_a = g.s_pad / d.a_w;
    d.tau_d = g.l_wire * g.l_wire / D;
    return d;
}

DeviceGeometry parse_geometry(std::string_view text) {
    DeviceGeometry g;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view val = trim(line.substr(eq + 1));
        if (val.empty()) throw ParseError("empty value for '" + key + "'", line_no);
        if (!seen.insert(key).second) throw ParseError("duplicate key '" + key + "'", line_no);
        try {
            if (key == "label") {
                std::string v(val);
                if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
                g.label = v;
            } else if (key == "example_only") {
                if (val == "true") g.example_only = true;
                else if (val == "false") g.example_only = false;
                else throw ParseError("example_only must be true or false");
            } else if (key == "w_wire") g.w_wire = parse_quantity(val, Dim::length, true);
            else if (key == "l_wire") g.l_wire = parse_quantity(val, Dim::length, true);
            else if (key == "h_cap") g.h_cap = parse_quantity(val, Dim::length, true);
            else if (key == "l_half_gap") g.l_half_gap = parse_quantity(val, Dim::length, true);
            else if (key == "w_cap") g.w_cap = parse_quantity(val, Dim::length, true);
            else if (key == "l_cap") g.l_cap = parse_quantity(val, Dim::length, true);
            else if (key == "s_pad") g.s_pad = parse_quantity(val, Dim::area, true);
            else throw ParseError("unknown key '" + key + "'");
        } catch (const ParseError& e) {
            if (e.line) throw;
            throw ParseError(e.what(), line_no);
        }
    }
    for (const char* k : {"w_wire", "l_wire", "h_cap", "l_half_gap", "w_cap", "l_cap", "s_pad"})
        if (!seen.count(k)) throw ParseError(std::string("missing key '") + k + "'");
    validate(g);
    return g;
}

std::string format_geometry(const DeviceGeometry& g) {
    std::ostringstream os;
    if (!g.label.empty()) os << "label = " << g.label << "\n";
    os << "example_only = " << (g.example_only ? "true" : "false") << "\n";
    os << "w_wire = " << g17(g.w_wire) << "\n";
    os << "l_wire = " << g17(g.l_wire) << "\n";
    os << "h_cap = " << g17(g.h_cap) << "\n";
    os << "l_half_gap = " << g17(g.l_half_gap) << "\n";
    os << "w_cap = " << g17(g.w_cap) << "\n";
    os << "l_cap = " << g17(g.l_cap) << "\n";
    os << "s_pad = " << g17(g.s_pad) << "\n";
    return os.str();
}

}  // namespace qpdyn
