#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qpdyn/geometry.hpp"

namespace qpdyn {

struct VortexConfig {
    int n_left = 0;
    int n_right = 0;
    double trapping_power = 0.0;  // P, m^2/s
};

struct TransportParams {
    double D = 0.0;   // m^2/s
    double s0 = 0.0;  // 1/s, homogeneous background trapping
};

void validate(const VortexConfig& v);
void validate(const TransportParams& tp);

// reduced: junction wire length neglected; full: finite l.
enum class EigenForm { reduced, full };

std::string_view form_name(EigenForm f);
EigenForm parse_form(std::string_view s);

struct CapSub {
    double value = 0.0;  // effective tan(z h / L)
    double numerator = 0.0;
    double denominator = 0.0;
    bool near_pole = false;
};

// Effective tan(z h / L) of a capacitor arm made of a thin (h, W) section
// followed by a wide (L_c, W_c) section closed at its far end.
CapSub capacitor_substitution(double z, const DeviceGeometry& g);

struct Residual {
    double value = 0.0;
    bool near_pole = false;
};

// Left-hand side of the mode condition at z = kL. z = 0 is always a root.
Residual eigen_residual(double z, const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp,
                        EigenForm form);

// The residual divided by z, whose smallest positive root is the slowest mode.
Residual scaled_residual(double z, const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp,
                         EigenForm form);

struct ModeSolution {
    double z = 0.0;
    double s = 0.0;  // 1/s
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double residual_at_root = 0.0;  // scaled residual at z
    double residual_scale = 0.0;    // |dF/dz| z at the root
    int evaluations = 0;
    std::string branch_note;
};

ModeSolution smallest_root(const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp,
                           EigenForm form = EigenForm::full);

// N P / A_total + s0
double small_p_rate(const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp);

// Root in the limit of perfectly absorbing pads: (pi/2) / (1 + A_c / A_W).
double large_p_z(const DeviceGeometry& g);

// Poles of tan z, of the capacitor substitution and (full form) of tan(2 z l / L) below z_max.
std::vector<double> residual_poles(const DeviceGeometry& g, EigenForm form, double z_max);

enum class VortexSeries { alternating, pairs };
VortexSeries parse_series(std::string_view s);
std::string_view series_name(VortexSeries s);

struct StepEntry {
    int n_left = 0;
    int n_right = 0;
    double s = 0.0;            // 1/s
    double trapping_sa = 0.0;  // (s - s0) A_total, m^2/s
};

// Entries 0..max_steps of the vortex series. Evaluations may run on `threads`
// workers (0: hardware concurrency); the output order never depends on it.
std::vector<StepEntry> step_sequence(const DeviceGeometry& g, const TransportParams& tp, double P,
                                     VortexSeries series, int max_steps, EigenForm form = EigenForm::full,
                                     int threads = 1);

enum class SweepMapping { equal, alternating };
SweepMapping parse_mapping(std::string_view s);
std::string_view mapping_name(SweepMapping m);

struct SweepPoint {
    double b = 0.0;  // T
    int n_left = 0;
    int n_right = 0;
    double s = 0.0;
    double trapping_sa = 0.0;
};

// Vortex counts for field b: none below b_k; above, N_L = N_R = round(slope (b - b_k))
// for the equal mapping, or round(2 slope (b - b_k)) vortices split alternately.
std::pair<int, int> vortices_at_field(double b, double b_k, double slope, SweepMapping mapping);

std::vector<SweepPoint> field_sweep(const DeviceGeometry& g, const TransportParams& tp, double P,
                                    std::span<const double> b_grid, double b_k, double slope,
                                    SweepMapping mapping = SweepMapping::equal, EigenForm form = EigenForm::full,
                                    int threads = 1);

}  // namespace qpdyn
