#pragma once

#include <string>
#include <string_view>

namespace qpdyn {

// Physical dimension of a quantity parsed from text. Values are returned in SI.
enum class Dim {
    time,
    rate,
    length,
    area,
    diffusivity,
    energy,
    angular_frequency,
    resistance,
    field,
    inverse_field,
    temperature,
    dimensionless,
};

std::string_view dim_name(Dim d);

// Parses "<number><unit>" such as "18ms", "0.067cm2/s", "180ueV", "6GHz" or "1/170ns".
// A number without a unit is rejected unless allow_bare is set, in which case it
// is taken as SI. Dim::dimensionless always accepts bare numbers (and "inf").
// angular_frequency accepts rad/s directly; Hz-type units are cycle frequencies
// and are multiplied by 2*pi.
double parse_quantity(std::string_view text, Dim dim, bool allow_bare = false);

// Strict full-string double parse; throws ParseError on trailing garbage.
double parse_number(std::string_view text);

namespace units {
inline constexpr double us = 1e-6;
inline constexpr double ms = 1e-3;
inline constexpr double ns = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double nm = 1e-9;
inline constexpr double cm2 = 1e-4;        // m^2
inline constexpr double cm2_per_s = 1e-4;  // m^2/s
inline constexpr double gauss = 1e-4;      // T
inline constexpr double mG = 1e-7;         // T
inline constexpr double eV = 1.602176634e-19;
inline constexpr double ueV = 1e-6 * eV;
}  // namespace units

}  // namespace qpdyn
