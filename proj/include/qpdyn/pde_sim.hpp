#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qpdyn/eigenmode.hpp"
#include "qpdyn/geometry.hpp"

namespace qpdyn {

struct Segment {
    std::string name;
    std::vector<int> nodes;          // includes both end nodes
    std::vector<double> positions;   // distance from the first node, m
    double width = 0.0;              // m
    double dx = 0.0;                 // m
};

// Vertex-centred finite volumes on the wire network with lumped pads.
// The semi-discrete system is M dx/dt = -K x (+ reaction terms), with M the
// diagonal node areas and K symmetric.
struct Discretization {
    DeviceGeometry geom;
    VortexConfig vortices;
    TransportParams tp;
    int resolution = 0;

    int n_nodes = 0;
    int pad_left = -1, pad_right = -1, cross_left = -1, cross_right = -1, junction = -1;
    Eigen::VectorXd area;                  // node areas M, m^2
    Eigen::SparseMatrix<double> stiffness;  // K, m^2/s: diffusion + pad trapping + s0 M
    Eigen::VectorXd sink;                   // diagonal non-diffusive part of K: pad trapping + s0 M
    std::vector<Segment> segments;

    double total_area() const { return area.sum(); }

    // v^T K v as a sum of edge differences plus sinks; non-negative without cancellation.
    double energy(const Eigen::VectorXd& v) const;
};

// resolution: target cells per length L; every segment gets at least 4 cells.
Discretization build(const DeviceGeometry& g, const VortexConfig& v, const TransportParams& tp,
                     int resolution = 50);

struct SlowestMode {
    double s = 0.0;        // 1/s
    Eigen::VectorXd mode;  // normalized to 1 at the junction node
    int iterations = 0;
};

SlowestMode slowest_mode(const Discretization& disc);

enum class InjectionMode { source, fixed_density };
InjectionMode parse_injection_mode(std::string_view s);
std::string_view injection_mode_name(InjectionMode m);

// source: the junction node receives amplitude * A_total / A_junction per second,
// i.e. amplitude is the injected density rate averaged over the whole device.
// fixed_density: the junction density is held at amplitude.
struct Injection {
    double amplitude = 0.0;
    double t_inj = 0.0;  // injection active for t < t_inj
    InjectionMode mode = InjectionMode::source;
};

struct EvolveSpec {
    double r = 0.0;  // 1/s
    double g = 0.0;  // 1/s
    Injection injection;
    std::vector<double> t_grid;   // output times, increasing, starting at t >= 0
    std::vector<double> x_init;   // per node; empty means zero everywhere
    double tolerance = 1e-6;      // step-doubling splitting error, area-weighted relative
};

struct EvolveResult {
    std::vector<double> t;
    std::vector<double> x_junction;
    std::vector<double> number;   // sum of area * density at each output time, m^2
    Eigen::VectorXd final_state;
    long steps = 0;
    long rejected = 0;
};

// Strang splitting: exact per-node recombination half steps around the exact
// affine flow of diffusion, trapping, generation and injection.
EvolveResult evolve(const Discretization& disc, const EvolveSpec& spec);

struct FactorizationOptions {
    double t_start = 200e-6;  // s
    double t_end = 0.0;       // s; 0 picks four 0-D steady-state lifetimes
    int points = 80;
};

struct FactorizationReport {
    double s_mode = 0.0;
    double r = 0.0, g = 0.0, x_init_amp = 0.0;
    double recombination_ratio = 0.0;  // r x_init / s
    bool within_validity = false;      // recombination_ratio <= 10
    double max_rel_deviation = 0.0;
    double t_at_max = 0.0;
    std::vector<double> t, x_pde, x_model;
};

// Junction density of the full nonlinear system started in the slowest mode,
// compared with the zero-dimensional rate equation using the mode's rate.
FactorizationReport factorized_dynamics_check(const Discretization& disc, double r, double g, double x_init_amp,
                                              const FactorizationOptions& opt = {});

}  // namespace qpdyn
