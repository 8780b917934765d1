#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "qpdyn/errors.hpp"
#include "qpdyn/units.hpp"

using namespace qpdyn;
using Catch::Matchers::WithinRel;

TEST_CASE("suffixed quantities convert to SI", "[units]") {
    CHECK_THAT(parse_quantity("18ms", Dim::time), WithinRel(18e-3, 1e-15));
    CHECK_THAT(parse_quantity("200 us", Dim::time), WithinRel(200e-6, 1e-15));
    CHECK_THAT(parse_quantity("0.067cm2/s", Dim::diffusivity), WithinRel(6.7e-6, 1e-15));
    CHECK_THAT(parse_quantity("18 cm^2/s", Dim::diffusivity), WithinRel(1.8e-3, 1e-15));
    CHECK_THAT(parse_quantity("6.4e-5cm2", Dim::area), WithinRel(6.4e-9, 1e-15));
    CHECK_THAT(parse_quantity("80um", Dim::length), WithinRel(80e-6, 1e-15));
    CHECK_THAT(parse_quantity("180ueV", Dim::energy), WithinRel(180e-6 * 1.602176634e-19, 1e-15));
    CHECK_THAT(parse_quantity("100mG", Dim::field), WithinRel(1e-5, 1e-15));
    CHECK_THAT(parse_quantity("0.5/mG", Dim::inverse_field), WithinRel(5e6, 1e-15));
    CHECK_THAT(parse_quantity("8kOhm", Dim::resistance), WithinRel(8e3, 1e-15));
    CHECK_THAT(parse_quantity("20mK", Dim::temperature), WithinRel(0.02, 1e-15));
}

TEST_CASE("cycle frequencies become angular frequencies", "[units]") {
    CHECK_THAT(parse_quantity("6GHz", Dim::angular_frequency), WithinRel(2 * std::numbers::pi * 6e9, 1e-15));
    CHECK_THAT(parse_quantity("1e3rad/s", Dim::angular_frequency), WithinRel(1e3, 1e-15));
}

TEST_CASE("reciprocal time form for rates", "[units]") {
    CHECK_THAT(parse_quantity("1/170ns", Dim::rate), WithinRel(1.0 / 170e-9, 1e-15));
    CHECK_THAT(parse_quantity("1/9.5us", Dim::rate), WithinRel(1.0 / 9.5e-6, 1e-15));
    CHECK_THAT(parse_quantity("5/us", Dim::rate), WithinRel(5e6, 1e-15));
    CHECK_THROWS_AS(parse_quantity("1/0ns", Dim::rate), ParseError);
}

TEST_CASE("bare numbers need a unit unless allowed", "[units]") {
    CHECK_THROWS_AS(parse_quantity("0.067", Dim::diffusivity), ParseError);
    CHECK(parse_quantity("0.5", Dim::length, true) == 0.5);
    CHECK(parse_quantity("0.9", Dim::dimensionless) == 0.9);
    CHECK(std::isinf(parse_quantity("inf", Dim::dimensionless)));
}

TEST_CASE("malformed quantities are rejected", "[units]") {
    CHECK_THROWS_AS(parse_quantity("", Dim::time), ParseError);
    CHECK_THROWS_AS(parse_quantity("ms", Dim::time), ParseError);
    CHECK_THROWS_AS(parse_quantity("18 parsecs", Dim::length), ParseError);
    CHECK_THROWS_AS(parse_quantity("18ms", Dim::length), ParseError);
    CHECK_THROWS_AS(parse_number("1.5x"), ParseError);
}

TEST_CASE("error kinds map to distinct exit codes", "[units]") {
    CHECK(UsageError("x").exit_code() == 2);
    CHECK(IoError("x").exit_code() == 3);
    CHECK(ParseError("x", 7).exit_code() == 4);
    CHECK(std::string(ParseError("bad", 7).what()) == "line 7: bad");
    CHECK(InvalidParameterError("x").exit_code() == 5);
    CHECK(NumericalError("x").exit_code() == 6);
    CHECK(InsufficientDataError("x").exit_code() == 7);
}
