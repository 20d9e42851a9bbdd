#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "subabsorb/core.hpp"
#include "subabsorb/errors.hpp"

using namespace subabsorb;

TEST_CASE("natural-unit conversions for the Rb D2 defaults")
{
    const AtomicSpecies rb;
    CHECK(rb.to_ns(2.0) == doctest::Approx(52.4).epsilon(1e-12));
    CHECK(rb.from_ns(26.2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rb.to_natural_length(780e-9) == doctest::Approx(1.0));
    CHECK(rb.to_rad_per_s(1.0) == doctest::Approx(1.0 / 26.2e-9));

    // 0.01 atoms per lambda^3 at 780 nm, (7.8e-5 cm)^3 = 4.74552e-13 cm^3.
    const double n = rb.density_per_cm3(0.01);
    CHECK(n == doctest::Approx(2.10724e10).epsilon(1e-5));
    CHECK(rb.density_per_lambda3(n) == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("dephasing rate from beta")
{
    const AtomicSpecies rb;
    // 2 pi * 4.9e-5 Hz cm^3 * 1e11 cm^-3 * 26.2e-9 s
    CHECK(gamma_dd_from_beta(4.9e-5, 1e11, rb) == doctest::Approx(0.8066353).epsilon(1e-6));
    CHECK(gamma_dd_from_beta(0.0, 1e12, rb) == 0.0);
    CHECK_THROWS_AS(gamma_dd_from_beta(-1.0, 1e11, rb), DomainError);

    CHECK(dephasing_suppression(0.0) == 1.0);
    CHECK(dephasing_suppression(1.0) == 0.5);
    CHECK(dephasing_suppression(1e9) < 1e-17);
}

TEST_CASE("optical depth from box geometry")
{
    EnsembleConfig c;
    c.atom_count = 500;
    c.box = {50.0, 50.0, 50.0};
    // n sigma_0 a_z = 500/125000 * 3/(2 pi) * 50
    CHECK(optical_depth_from_geometry(c).sigma_ss == doctest::Approx(0.0954930).epsilon(1e-6));
    c.box = {15.0, 15.0, 15.0};
    CHECK(optical_depth_from_geometry(c).sigma_ss == doctest::Approx(1.0610330).epsilon(1e-6));

    for (double sigma : {0.02, 0.3, 2.0}) {
        const double a = cube_side_for_optical_depth(500, sigma);
        c.box = {a, a, a};
        CHECK(optical_depth_from_geometry(c).sigma_ss == doctest::Approx(sigma).epsilon(1e-12));
    }

    c.atom_count = 0;
    CHECK(optical_depth_from_geometry(c).sigma_ss == 0.0);
    c.box = {0.0, 1.0, 1.0};
    CHECK_THROWS_AS(optical_depth_from_geometry(c), DomainError);
}

TEST_CASE("ensemble validation")
{
    EnsembleConfig c;
    CHECK_NOTHROW(c.validate());
    c.atom_count = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.box.y = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.realization_count = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("smooth ramp has the configured 10-90 rise")
{
    PulseShape p;
    p.kind = PulseKind::SmoothRamp;
    p.amplitude = 1e-3;
    const double peak = p.amplitude * p.amplitude;
    auto intensity = [&](double t) { return std::norm(p.rabi(t)) / peak; };
    auto crossing = [&](double level) {
        double lo = 0.0, hi = 2.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (intensity(mid) < level ? lo : hi) = mid;
        }
        return lo;
    };
    CHECK(crossing(0.9) - crossing(0.1) == doctest::Approx(p.rise_10_90).epsilon(1e-9));
    CHECK(intensity(p.rise_10_90) == doctest::Approx(0.5));
    CHECK(intensity(0.0) < 1e-2);
    CHECK(intensity(8.0) == doctest::Approx(1.0));

    p.kind = PulseKind::Step;
    CHECK(p.rabi(0.0) == cplx(1e-3, 0.0));
    CHECK(p.rabi(-0.1) == cplx(0.0, 0.0));
}
