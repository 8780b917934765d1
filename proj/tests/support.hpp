#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "qpdyn/geometry.hpp"
#include "qpdyn/rng.hpp"
#include "qpdyn/units.hpp"

namespace qpdyn::test {

// Uniform draws on [a, b).
struct Uniform {
    CounterRng rng;
    explicit Uniform(std::uint64_t seed) : rng(seed) {}
    double operator()(double a, double b) { return a + (b - a) * rng.uniform(); }
};

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Same lengths as data/b*_like.geom.
inline DeviceGeometry b_like(double w_cap, double l_half, const std::string& label) {
    using namespace units;
    return DeviceGeometry{40 * um, 1000 * um, 60 * um, l_half, w_cap, 100 * um, 80 * um * 80 * um, label, true};
}
inline DeviceGeometry b1() { return b_like(15 * units::um, 7.5 * units::um, "B1-like"); }
inline DeviceGeometry b2() { return b_like(10 * units::um, 5 * units::um, "B2-like"); }
inline DeviceGeometry b3() { return b_like(30 * units::um, 15 * units::um, "B3-like"); }

inline constexpr double P_ref = 0.067 * units::cm2_per_s;
inline constexpr double D_ref = 18 * units::cm2_per_s;

}  // namespace qpdyn::test
