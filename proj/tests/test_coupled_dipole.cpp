#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "subabsorb/analysis.hpp"
#include "subabsorb/coupled_dipole.hpp"
#include "subabsorb/errors.hpp"
#include "oracles.hpp"

using namespace subabsorb;

namespace {

// Im F for polarization x and separation k r = x at angle theta, from an
// arbitrary-precision evaluation of the coupling formula.
struct CouplingGolden {
    double theta, x, im_f;
};
constexpr CouplingGolden kGolden[] = {
    {0.0, 0.05, -0.4998750111601976}, {0.0, 0.5, -0.48761109190819973}, {0.0, 1.0, -0.45175301840963517},
    {0.0, 3.141592653589793, -0.15198177546350666}, {0.0, 5.0, 0.028526822423751236},
    {0.0, 20.0, 0.0013591304972887899}, {0.5235987755982989, 0.05, -0.49984376674016723},
    {0.5235987755982989, 0.5, -0.48454150941920093}, {0.5235987755982989, 1.0, -0.4401214461575026},
    {0.5235987755982989, 3.141592653589793, -0.09498860966469166}, {0.5235987755982989, 5.0, 0.053788924314712216},
    {0.5235987755982989, 20.0, -0.007709405164766016}, {0.7853981633974483, 0.05, -0.49981252232013684},
    {0.7853981633974483, 0.5, -0.4814719269302022}, {0.7853981633974483, 1.0, -0.42848987390536997},
    {0.7853981633974483, 3.141592653589793, -0.037995443865876666}, {0.7853981633974483, 5.0, 0.0790510262056732},
    {0.7853981633974483, 20.0, -0.016777940826820822}, {1.0471975511965979, 0.05, -0.4997812779001065},
    {1.0471975511965979, 0.5, -0.4784023444412034}, {1.0471975511965979, 1.0, -0.4168583016532374},
    {1.0471975511965979, 3.141592653589793, 0.018997721932938333}, {1.0471975511965979, 5.0, 0.10431312809663418},
    {1.0471975511965979, 20.0, -0.025846476488875628}, {1.5707963267948966, 0.05, -0.49975003348007613},
    {1.5707963267948966, 0.5, -0.47533276195220464}, {1.5707963267948966, 1.0, -0.40522672940110477},
    {1.5707963267948966, 3.141592653589793, 0.07599088773175333}, {1.5707963267948966, 5.0, 0.12957522998759516},
    {1.5707963267948966, 20.0, -0.03491501215093043},
};

Eigen::Vector3d separation(double theta, double x)
{
    const double r = x / kTwoPi;
    return {r * std::cos(theta), 0.0, r * std::sin(theta)};
}

EnsembleRealization realization_of(std::vector<Eigen::Vector3d> positions)
{
    EnsembleRealization r;
    r.positions = std::move(positions);
    return r;
}

}  // namespace

TEST_CASE("coupling constants match the golden table")
{
    for (const auto& g : kGolden) {
        const cplx f = coupling_f(separation(g.theta, g.x), Eigen::Vector3d::UnitX(), CouplingMode::Vectorial);
        CAPTURE(g.theta);
        CAPTURE(g.x);
        CHECK(f.real() == 0.0);
        CHECK(f.imag() == doctest::Approx(g.im_f).epsilon(1e-12));
    }
    // Hand value on axis at k r = pi: -(3/pi^2)(1/2) i.
    const cplx axis = coupling_f(separation(0.0, std::numbers::pi), Eigen::Vector3d::UnitX(), CouplingMode::Vectorial);
    CHECK(axis.imag() == doctest::Approx(-1.5 / (std::numbers::pi * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("scalar mode uses the on-axis angular factor for every direction")
{
    for (const auto& g : kGolden) {
        const cplx f = coupling_f(separation(g.theta, g.x), Eigen::Vector3d::UnitX(), CouplingMode::Scalar);
        const cplx on_axis = coupling_f(separation(0.0, g.x), Eigen::Vector3d::UnitX(), CouplingMode::Vectorial);
        CHECK(f.imag() == doctest::Approx(on_axis.imag()).epsilon(1e-12));
    }
}

TEST_CASE("coupling properties")
{
    const Eigen::Vector3d r(0.3, -0.2, 0.45);
    const Eigen::Vector3d pol = Eigen::Vector3d::UnitX();
    CHECK(coupling_f(r, pol, CouplingMode::Vectorial) == coupling_f(-r, pol, CouplingMode::Vectorial));
    CHECK(std::abs(coupling_f(Eigen::Vector3d(2e3, 0.0, 0.0), pol, CouplingMode::Vectorial)) < 1e-6);
    CHECK(std::abs(coupling_f(Eigen::Vector3d(0.0, 2e3, 0.0), pol, CouplingMode::Vectorial)) < 1e-3);
    CHECK_THROWS_AS(coupling_f(Eigen::Vector3d(0.01, 0.0, 0.0), pol, CouplingMode::Vectorial, 0.05), DomainError);
    // Series branch and direct branch agree across the switch.
    const cplx below = coupling_f(separation(0.7, 0.0099999), pol, CouplingMode::Vectorial);
    const cplx above = coupling_f(separation(0.7, 0.0100001), pol, CouplingMode::Vectorial);
    CHECK(below.imag() == doctest::Approx(above.imag()).epsilon(1e-9));
}

TEST_CASE("two-atom coupling matrix matches a hand construction")
{
    const auto real2 = realization_of({{0.0, 0.0, 0.0}, {0.1, 0.2, 0.3}});
    const cplx f = coupling_f(real2.positions[1] - real2.positions[0], Eigen::Vector3d::UnitX(),
                              CouplingMode::Vectorial);
    const CouplingMatrix h0 = build_coupling_matrix(real2, 0.0);
    CHECK(h0.h(0, 0) == cplx(0.5, 0.0));
    CHECK(h0.h(1, 1) == cplx(0.5, 0.0));
    CHECK(h0.h(0, 1) == cplx(0.0, 1.0) * f);
    CHECK(h0.h(1, 0) == h0.h(0, 1));

    const CouplingMatrix h1 = build_coupling_matrix(real2, 1.0);
    CHECK(h1.h(0, 1) == 0.5 * h0.h(0, 1));
    CHECK(h1.h(0, 0) == cplx(0.5, 0.0));
    const CouplingMatrix hbig = build_coupling_matrix(real2, 1e8);
    CHECK(std::abs(hbig.h(0, 1)) < 1e-16);
}

TEST_CASE("dephasing suppression shrinks every off-diagonal element")
{
    EnsembleConfig c;
    c.atom_count = 30;
    c.box = {3.0, 3.0, 3.0};
    const auto real = sample_positions(c, 7);
    const auto a = build_coupling_matrix(real, 0.3).h;
    const auto b = build_coupling_matrix(real, 0.9).h;
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            if (j != k && std::abs(a(j, k)) > 0.0) {
                CHECK(std::abs(b(j, k)) < std::abs(a(j, k)));
            }
        }
    }
}

TEST_CASE("position sampling")
{
    EnsembleConfig c;
    c.atom_count = 500;
    c.box = {12.0, 12.0, 12.0};
    const auto r = sample_positions(c, 11);
    REQUIRE(r.size() == 500);
    std::size_t pairs = 0;
    double closest = 1e9;
    for (std::size_t j = 0; j < r.size(); ++j) {
        CHECK((r.positions[j].array() >= 0.0).all());
        CHECK((r.positions[j].array() <= 12.0).all());
        for (std::size_t k = j + 1; k < r.size(); ++k) {
            closest = std::min(closest, (r.positions[j] - r.positions[k]).norm());
            ++pairs;
        }
    }
    CHECK(pairs == 124750);
    CHECK(closest >= 0.05);
    CHECK(r.min_pair_distance == doctest::Approx(closest));

    const auto again = sample_positions(c, 11);
    CHECK(again.positions == r.positions);
    CHECK(again.hash() == r.hash());
    CHECK(sample_positions(c, 12).hash() != r.hash());

    c.atom_count = 1;
    CHECK(sample_positions(c, 3).size() == 1);

    c.atom_count = 100000;
    c.box = {0.3, 0.3, 0.3};
    c.min_pair_separation = 0.1;
    CHECK_THROWS_AS(sample_positions(c, 1), DensityTooHighError);
}

TEST_CASE("single atom follows the scalar closed form")
{
    const auto one = realization_of({{0.2, 0.3, 0.4}});
    const double omega = 1e-4;
    const auto h = build_coupling_matrix(one, 0.0);
    const Eigen::VectorXcd drive = drive_vector(one, omega);
    const std::vector<double> t = default_dipole_times();
    for (auto method : {EvolutionMethod::Eigen, EvolutionMethod::Pade, EvolutionMethod::Integrate}) {
        const AmplitudeState s = evolve_closed_form(h, drive, t, method);
        for (std::size_t k = 0; k < t.size(); ++k) {
            const cplx expected = cplx(0.0, -2.0 * omega) * (1.0 - std::exp(-0.5 * t[k])) * drive(0) / omega;
            CHECK(std::abs(s.c(0, static_cast<Eigen::Index>(k)) - expected) <= 1e-9 * 2.0 * omega);
        }
        const DipoleTrace p = dipole_trace(s, one);
        CHECK(p.p[0] == 0.0);
        for (std::size_t k = 0; k < t.size(); ++k) {
            CHECK(p.p[k] == doctest::Approx(1.0 - std::exp(-0.5 * t[k])).epsilon(1e-8));
        }
    }
}

TEST_CASE("closed form agrees with direct integration for small ensembles")
{
    const std::vector<double> t{0.0, 0.25, 1.0, 2.5, 5.0, 8.0};
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        EnsembleConfig c;
        c.atom_count = 2 + static_cast<int>(seed % 19);
        c.box = {1.5, 1.5, 1.5};
        const auto real = sample_positions(c, seed);
        const auto h = build_coupling_matrix(real, 0.1 * static_cast<double>(seed % 3));
        const Eigen::VectorXcd drive = drive_vector(real, 1e-4);
        const auto reference = oracle::rk4_amplitudes(h.h, drive, t, 1e-3);
        for (auto method : {EvolutionMethod::Auto, EvolutionMethod::Eigen, EvolutionMethod::Pade}) {
            CAPTURE(seed);
            CHECK(oracle::max_relative_gap(evolve_closed_form(h, drive, t, method).c, reference) < 1e-6);
        }
    }
}

TEST_CASE("complex non-symmetric routes agree with integration")
{
    // Arbitrary complex-symmetric H with a decaying spectrum exercises the
    // general eigen and Pade routes.
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 0.15);
    const int n = 8;
    CouplingMatrix h;
    h.h = Eigen::MatrixXcd::Identity(n, n) * 0.5;
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            const cplx v(g(rng), g(rng));
            h.h(j, k) = v;
            h.h(k, j) = v;
        }
    }
    Eigen::VectorXcd drive(n);
    for (int j = 0; j < n; ++j) {
        drive(j) = 1e-4 * std::exp(cplx(0.0, 0.3 * j));
    }
    const std::vector<double> t{0.5, 2.0, 8.0};
    const auto reference = oracle::rk4_amplitudes(h.h, drive, t, 1e-3);
    for (auto method : {EvolutionMethod::Eigen, EvolutionMethod::Pade, EvolutionMethod::Integrate}) {
        CHECK(oracle::max_relative_gap(evolve_closed_form(h, drive, t, method).c, reference) < 1e-6);
    }
}

TEST_CASE("amplitudes are linear in the drive and start from zero")
{
    EnsembleConfig c;
    c.atom_count = 40;
    c.box = {4.0, 4.0, 4.0};
    const auto real = sample_positions(c, 3);
    const auto h = build_coupling_matrix(real, 0.0);
    const auto t = default_dipole_times();
    const AmplitudeState a = evolve_closed_form(h, drive_vector(real, 1e-5), t);
    const AmplitudeState b = evolve_closed_form(h, drive_vector(real, 3e-5), t);
    CHECK(a.c.col(0).norm() == 0.0);
    CHECK((b.c - 3.0 * a.c).norm() <= 1e-12 * b.c.norm());
    const auto pa = dipole_trace(a, real).p;
    const auto pb = dipole_trace(b, real).p;
    for (std::size_t k = 0; k < pa.size(); ++k) {
        CHECK(pa[k] == doctest::Approx(pb[k]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(evolve_closed_form(h, drive_vector(real, 0.5), t), PerturbativeBoundError);
}

TEST_CASE("spectral trace equals the direct amplitude route")
{
    EnsembleConfig c;
    c.atom_count = 60;
    c.box = {5.0, 5.0, 5.0};
    const auto real = sample_positions(c, 9);
    const auto t = default_dipole_times();
    const ExchangeSpectrum spectrum(real, CouplingMode::Vectorial);
    for (double gamma : {0.0, 0.7, 3.0}) {
        const DipoleTrace fast = spectrum.dipole_trace(gamma, 1e-4, t);
        const DipoleTrace slow = dipole_trace(
            evolve_closed_form(build_coupling_matrix(real, gamma), drive_vector(real, 1e-4), t), real);
        for (std::size_t k = 0; k < t.size(); ++k) {
            CHECK(fast.p[k] == doctest::Approx(slow.p[k]).epsilon(1e-10));
        }
    }
}

TEST_CASE("ensemble runs are deterministic and thread-independent")
{
    CoupledDipoleConfig c;
    c.ensemble.atom_count = 80;
    c.ensemble.box = {6.0, 6.0, 6.0};
    c.ensemble.realization_count = 4;
    const EnsembleResult a = run_ensemble(c);
    const EnsembleResult b = run_ensemble(c);
    c.threads = 3;
    const EnsembleResult d = run_ensemble(c);
    CHECK(a.mean == b.mean);
    CHECK(a.mean == d.mean);
    CHECK(a.standard_error == d.standard_error);
    REQUIRE(a.runs.size() == 4);
    CHECK(a.runs[2].seed == c.ensemble.seed + 2);

    c.ensemble.realization_count = 1;
    c.threads = 1;
    const EnsembleResult one = run_ensemble(c);
    const auto real = sample_positions(c.ensemble, c.ensemble.seed);
    const DipoleTrace single = ExchangeSpectrum(real, c.mode, c.polarization, c.ensemble.min_pair_separation)
                                   .dipole_trace(0.0, c.amplitude, default_dipole_times());
    CHECK(one.mean == single.p);
}

TEST_CASE("dense cube shows a slower rise than the dilute limit")
{
    CoupledDipoleConfig c;
    c.ensemble.atom_count = 500;
    c.ensemble.box = {15.0, 15.0, 15.0};
    c.ensemble.realization_count = 10;
    const EnsembleResult r = run_ensemble(c);
    std::vector<double> taus;
    for (const auto& run : r.runs) {
        taus.push_back(fit_rise_time(optical_depth_from_dipole(run.trace, r.sigma_ss), r.sigma_ss).tau / 2.0);
    }
    const double mean = std::accumulate(taus.begin(), taus.end(), 0.0) / taus.size();
    double var = 0.0;
    for (double t : taus) {
        var += (t - mean) * (t - mean);
    }
    const double se = std::sqrt(var / (taus.size() - 1) / taus.size());
    CHECK(mean > 1.0);
    CHECK(se < mean - 1.0);
}
