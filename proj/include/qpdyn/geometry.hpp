#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qpdyn {

// Two pads joined through horizontal wires (length L, width W) to a short
// central junction wire of length 2l. Each cross point carries two capacitor
// arms: a thin section (h, W) followed by a wide section (L_c, W_c).
struct DeviceGeometry {
    double w_wire = 0.0;      // W, m
    double l_wire = 0.0;      // L, m
    double h_cap = 0.0;       // h, m
    double l_half_gap = 0.0;  // l, m
    double w_cap = 0.0;       // W_c, m
    double l_cap = 0.0;       // L_c, m (0 allowed: thin arms only)
    double s_pad = 0.0;       // S_pad, m^2
    std::string label;
    bool example_only = false;

    bool operator==(const DeviceGeometry&) const = default;
};

struct DerivedGeometry {
    double a_w = 0.0;       // L W
    double a_c = 0.0;       // 2 (L_c W_c + h W), capacitor area on one side
    double a_total = 0.0;   // 2 S_pad + 2 A_W + 2 A_c + 2 l W
    double aspect_a = 0.0;  // S_pad / A_W
    double tau_d = 0.0;     // L^2 / D
};

// Hard violations; empty when the geometry is usable.
std::vector<std::string> geometry_violations(const DeviceGeometry& g);

// Soft checks on the thin-wire assumptions.
std::vector<std::string> geometry_warnings(const DeviceGeometry& g);

// Throws InvalidGeometryError listing every violation.
void validate(const DeviceGeometry& g);

DerivedGeometry derive(const DeviceGeometry& g, double D);

// Config text: one `key = value` per line, '#' starts a comment. Length and
// area values take unit suffixes (80um, 6.4e-5cm2); bare numbers are SI.
DeviceGeometry parse_geometry(std::string_view text);

// Inverse of parse_geometry; values written in SI with 17 significant digits.
std::string format_geometry(const DeviceGeometry& g);

}  // namespace qpdyn
