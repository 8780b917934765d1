#include "qpdyn/units.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "qpdyn/errors.hpp"

namespace qpdyn {

namespace {

using Table = std::vector<std::pair<std::string_view, double>>;

const Table& time_units() {
    static const Table t{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"µs", 1e-6}, {"μs", 1e-6},
                         {"ns", 1e-9}, {"ps", 1e-12}, {"min", 60.0}};
    return t;
}

const Table& table_for(Dim d) {
    static const Table rate{{"/s", 1.0},   {"1/s", 1.0},    {"s-1", 1.0},  {"/ms", 1e3},
                            {"ms-1", 1e3}, {"/us", 1e6},    {"us-1", 1e6}, {"/µs", 1e6},
                            {"/μs", 1e6},  {"/ns", 1e9},    {"ns-1", 1e9}, {"1/ms", 1e3},
                            {"1/us", 1e6}, {"1/µs", 1e6},   {"1/μs", 1e6}, {"1/ns", 1e9}};
    static const Table length{{"m", 1.0},   {"cm", 1e-2},  {"mm", 1e-3}, {"um", 1e-6},
                              {"µm", 1e-6}, {"μm", 1e-6},  {"nm", 1e-9}};
    static const Table area{{"m2", 1.0},    {"cm2", 1e-4},  {"mm2", 1e-6}, {"um2", 1e-12},
                            {"µm2", 1e-12}, {"μm2", 1e-12}, {"nm2", 1e-18}};
    static const Table diffusivity{{"m2/s", 1.0}, {"cm2/s", 1e-4}, {"mm2/s", 1e-6},
                                   {"um2/s", 1e-12}, {"µm2/s", 1e-12}, {"μm2/s", 1e-12}};
    static const Table energy{{"J", 1.0},
                              {"eV", units::eV},
                              {"meV", 1e-3 * units::eV},
                              {"ueV", 1e-6 * units::eV},
                              {"µeV", 1e-6 * units::eV},
                              {"μeV", 1e-6 * units::eV}};
    constexpr double tau = 2.0 * std::numbers::pi;
    static const Table angular{{"rad/s", 1.0},    {"Hz", tau},        {"kHz", tau * 1e3},
                               {"MHz", tau * 1e6}, {"GHz", tau * 1e9}};
    static const Table resistance{{"Ohm", 1.0},  {"ohm", 1.0},  {"Ω", 1.0},   {"kOhm", 1e3},
                                  {"kohm", 1e3}, {"kΩ", 1e3},   {"MOhm", 1e6}, {"Mohm", 1e6}};
    static const Table field{{"T", 1.0},     {"mT", 1e-3},  {"uT", 1e-6}, {"µT", 1e-6},
                             {"G", 1e-4},    {"mG", 1e-7},  {"uG", 1e-10}};
    static const Table inverse_field{{"/T", 1.0}, {"/mT", 1e3}, {"/G", 1e4}, {"/mG", 1e7}};
    static const Table temperature{{"K", 1.0}, {"mK", 1e-3}};
    static const Table none{};
    switch (d) {
        case Dim::time: return time_units();
        case Dim::rate: return rate;
        case Dim::length: return length;
        case Dim::area: return area;
        case Dim::diffusivity: return diffusivity;
        case Dim::energy: return energy;
        case Dim::angular_frequency: return angular;
        case Dim::resistance: return resistance;
        case Dim::field: return field;
        case Dim::inverse_field: return inverse_field;
        case Dim::temperature: return temperature;
        case Dim::dimensionless: return none;
    }
    return none;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Drops spaces, '^' and '*' so "cm^2/s" and "cm2/s" compare equal; "s^-1" becomes "s-1".
std::string normalize_unit(std::string_view u) {
    std::string out;
    for (char c : u)
        if (c != ' ' && c != '^' && c != '*') out += c;
    return out;
}

// Longest numeric prefix accepted by from_chars.
std::pair<double, std::size_t> leading_number(std::string_view s) {
    double v = 0.0;
    const char* begin = s.data();
    if (!s.empty() && s.front() == '+') ++begin;
    auto res = std::from_chars(begin, s.data() + s.size(), v);
    if (res.ec != std::errc{}) return {0.0, 0};
    return {v, static_cast<std::size_t>(res.ptr - s.data())};
}

}  // namespace

std::string_view dim_name(Dim d) {
    switch (d) {
        case Dim::time: return "time";
        case Dim::rate: return "rate";
        case Dim::length: return "length";
        case Dim::area: return "area";
        case Dim::diffusivity: return "diffusivity";
        case Dim::energy: return "energy";
        case Dim::angular_frequency: return "angular frequency";
        case Dim::resistance: return "resistance";
        case Dim::field: return "magnetic field";
        case Dim::inverse_field: return "count per field";
        case Dim::temperature: return "temperature";
        case Dim::dimensionless: return "dimensionless";
    }
    return "?";
}

double parse_number(std::string_view text) {
    auto s = trim(text);
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    auto [v, n] = leading_number(s);
    if (n == 0 || n != s.size()) throw ParseError("not a number: '" + std::string(text) + "'");
    return v;
}

double parse_quantity(std::string_view text, Dim dim, bool allow_bare) {
    auto s = trim(text);
    if (s.empty()) throw ParseError("empty " + std::string(dim_name(dim)) + " value");
    if (dim == Dim::dimensionless) return parse_number(s);

    // "1/170ns" style reciprocal time for rates.
    if (dim == Dim::rate && s.size() > 2 && s.substr(0, 2) == "1/") {
        auto rest = trim(s.substr(2));
        auto [v, n] = leading_number(rest);
        if (n > 0 && n < rest.size()) {
            std::string unit = normalize_unit(rest.substr(n));
            for (const auto& [name, f] : time_units())
                if (unit == name) {
                    if (!(v > 0.0)) throw ParseError("reciprocal of non-positive time: '" + std::string(text) + "'");
                    return 1.0 / (v * f);
                }
        }
    }

    auto [v, n] = leading_number(s);
    if (n == 0) throw ParseError("not a " + std::string(dim_name(dim)) + " value: '" + std::string(text) + "'");
    if (n == s.size()) {
        if (allow_bare) return v;
        throw ParseError("bare number '" + std::string(text) + "' for a " + std::string(dim_name(dim)) +
                         " needs a unit suffix");
    }
    std::string unit = normalize_unit(s.substr(n));
    for (const auto& [name, f] : table_for(dim))
        if (unit == name) return v * f;
    throw ParseError("unknown " + std::string(dim_name(dim)) + " unit '" + unit + "' in '" + std::string(text) + "'");
}

}  // namespace qpdyn
