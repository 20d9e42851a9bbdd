#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "subabsorb/analysis.hpp"
#include "subabsorb/errors.hpp"
#include "subabsorb/maxwell_bloch.hpp"

using namespace subabsorb;

namespace {

std::vector<cplx> constant_drive(double omega, double dt, double duration)
{
    const auto n = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
    return std::vector<cplx>(n, cplx(omega, 0.0));
}

// Steady state of the driven, damped two-level atom written in the real
// variables (u, v, w) = (Re rho01, Im rho01, rho11) for a real drive.
Eigen::Vector3d steady_state_oracle(double omega, double delta)
{
    Eigen::Matrix3d a;
    Eigen::Vector3d b;
    a << -0.5, delta, 0.0,
         -delta, -0.5, omega,
         0.0, -omega, -1.0;
    b << 0.0, 0.5 * omega, 0.0;
    return a.colPivHouseholderQr().solve(b);
}

PulseShape weak_step(double detuning = 0.0)
{
    PulseShape p;
    p.kind = PulseKind::Step;
    p.amplitude = 1e-3;
    p.detuning = detuning;
    return p;
}

std::vector<double> sigma_of(const PulseShape& pulse, double sigma_ss, GridSpec grid = {})
{
    MaxwellBlochConfig c;
    c.pulse = pulse;
    c.medium.sigma_ss = sigma_ss;
    c.grid = grid;
    return optical_depth_trace(simulate_transmission(c)).sigma;
}

}  // namespace

TEST_CASE("weak resonant drive follows the single-atom coherence rise")
{
    const double omega = 1e-3, dt = 1.0 / 200.0;
    const auto rabi = constant_drive(omega, dt, 8.0);
    const BlochSeries s = evolve_density_matrix(rabi, 0.0, dt);
    double worst = 0.0;
    for (std::size_t k = 20; k < rabi.size(); ++k) {
        const double t = static_cast<double>(k) * dt;
        const cplx expected(0.0, -omega * (1.0 - std::exp(-0.5 * t)));
        worst = std::max(worst, std::abs(s.rho01[k] - expected) / std::abs(expected));
    }
    CHECK(worst < 1e-3);
    CHECK(s.rho01[0] == cplx(0.0, 0.0));
}

TEST_CASE("strong detuned drive relaxes to the algebraic steady state")
{
    const double dt = 1.0 / 200.0;
    for (auto [omega, delta] : {std::pair{0.8, 0.4}, std::pair{2.0, -1.0}, std::pair{0.3, 0.0}}) {
        const auto rabi = constant_drive(omega, dt, 40.0);
        const BlochSeries s = evolve_density_matrix(rabi, delta, dt);
        const Eigen::Vector3d ss = steady_state_oracle(omega, delta);
        CHECK(s.rho01.back().real() == doctest::Approx(ss(0)).epsilon(1e-8));
        CHECK(s.rho01.back().imag() == doctest::Approx(ss(1)).epsilon(1e-8));
        CHECK(s.rho11.back() == doctest::Approx(ss(2)).epsilon(1e-8));
        // Saturation formula as a cross-check of the oracle itself.
        const double textbook = 0.25 * omega * omega / (delta * delta + 0.25 + 0.5 * omega * omega);
        CHECK(ss(2) == doctest::Approx(textbook).epsilon(1e-12));
    }
}

TEST_CASE("trace is preserved on the whole grid")
{
    PulseShape p;
    p.amplitude = 0.3;
    p.detuning = 0.2;
    DerivedOpticalDepth m;
    m.sigma_ss = 1.0;
    const FieldGrid g = propagate_pulse(p, m);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.rho00.size(); ++i) {
        worst = std::max(worst, std::abs(g.rho00[i] + g.rho11[i] - 1.0));
    }
    CHECK(worst < 1e-9);
    CHECK(g.nz() == 51);
    CHECK(g.nt() == 1601);
}

// Exact linear response of the medium to a resonant step, Omega(L,t)/Omega0 =
// 1 + sum_n (-sigma/2)^n / n! P(n, t/2) with P the regularized lower incomplete
// gamma function; evaluated to 30 digits offline.
struct ExactStep {
    double sigma, t, ratio;
};
constexpr ExactStep kExactStep[] = {
    {0.5, 0.5, 0.9455226829350812}, {0.5, 1, 0.9044143560416839}, {0.5, 2, 0.850021337934995},
    {0.5, 4, 0.801576981221912},    {0.5, 8, 0.7810722448149483}, {1.0, 0.5, 0.8926680836006844},
    {1.0, 1, 0.8142456048703655},   {1.0, 2, 0.7153454225272176}, {1.0, 4, 0.6355397175371887},
    {1.0, 8, 0.6082208747724633},   {3.0, 0.5, 0.6968244500873064}, {3.0, 1, 0.5035412443729941},
    {3.0, 2, 0.30770372232152643},  {3.0, 4, 0.2164302435715331}, {3.0, 8, 0.21995030750125213},
};

TEST_CASE("weak step propagation matches the exact linear response")
{
    for (double sigma : {0.5, 1.0, 3.0}) {
        DerivedOpticalDepth m;
        m.sigma_ss = sigma;
        m.length = 7.0;
        const PulseShape p = weak_step();
        const FieldGrid g = propagate_pulse(p, m);
        for (const ExactStep& e : kExactStep) {
            if (e.sigma != sigma) {
                continue;
            }
            const auto it = static_cast<std::size_t>(std::llround(e.t / 0.005));
            const cplx out = g.rabi[g.index(g.nz() - 1, it)];
            CAPTURE(sigma);
            CAPTURE(e.t);
            CHECK(std::abs(out.imag()) < 1e-15);
            CHECK(out.real() / p.amplitude == doctest::Approx(e.ratio).epsilon(1e-6));
        }
    }
}

TEST_CASE("quasi-static closed form holds in the thin-medium limit only")
{
    auto worst_deviation = [](double sigma) {
        DerivedOpticalDepth m;
        m.sigma_ss = sigma;
        const PulseShape p = weak_step();
        const FieldGrid g = propagate_pulse(p, m);
        double worst = 0.0;
        for (std::size_t iz = 0; iz < g.nz(); ++iz) {
            for (std::size_t it = 0; it < g.nt(); ++it) {
                const cplx exact = analytic_weak_field(p.rabi(g.t[it]), g.t[it], g.z[iz], m);
                worst = std::max(worst, std::abs(g.rabi[g.index(iz, it)] - exact) / std::abs(exact));
            }
        }
        return worst;
    };
    CHECK(worst_deviation(0.01) < 1e-5);
    CHECK(worst_deviation(0.1) < 1e-3);
    // The closed form ignores the memory of the medium, an O(sigma^2) error.
    const double d05 = worst_deviation(0.5), d1 = worst_deviation(1.0);
    CHECK(d05 > 1e-3);
    CHECK(d1 > d05);
}

TEST_CASE("steady transmission is exp(-sigma_ss) on resonance")
{
    MaxwellBlochConfig c;
    c.pulse = weak_step();
    c.medium.sigma_ss = 0.7;
    c.grid.duration = 30.0;
    const TransmissionTrace tr = simulate_transmission(c);
    CHECK(std::log(tr.input.back() / tr.output.back()) == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("optical depth is linear-regime invariant under drive scaling")
{
    PulseShape a;
    a.amplitude = 1e-3;
    PulseShape b = a;
    b.amplitude = 1e-5;
    const auto sa = sigma_of(a, 0.5);
    const auto sb = sigma_of(b, 0.5);
    double worst = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) {
        if (sa[k] > 1e-3) {
            worst = std::max(worst, std::abs(sa[k] - sb[k]) / sa[k]);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("optical depth is symmetric in the sign of the detuning")
{
    PulseShape plus;
    plus.detuning = 0.4;
    PulseShape minus = plus;
    minus.detuning = -0.4;
    const auto sp = sigma_of(plus, 0.8);
    const auto sm = sigma_of(minus, 0.8);
    double worst = 0.0;
    for (std::size_t k = 0; k < sp.size(); ++k) {
        worst = std::max(worst, std::abs(sp[k] - sm[k]));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("fitted rise-time is converged on the default grid")
{
    for (double sigma : {0.1, 1.0}) {
        MaxwellBlochConfig coarse;
        coarse.medium.sigma_ss = sigma;
        MaxwellBlochConfig fine = coarse;
        fine.grid.time_step /= 2.0;
        fine.grid.z_steps = 2 * resolve_z_steps(sigma, 0);
        const double t1 = fit_rise_time(optical_depth_trace(simulate_transmission(coarse)), sigma).tau;
        const double t2 = fit_rise_time(optical_depth_trace(simulate_transmission(fine)), sigma).tau;
        CAPTURE(sigma);
        CHECK(std::abs(t1 - t2) / t2 < 2e-3);
    }
}

TEST_CASE("grid limits are enforced")
{
    DerivedOpticalDepth m;
    m.sigma_ss = 1.0;
    GridSpec g;
    g.time_step = 0.0;
    CHECK_THROWS_AS(propagate_pulse(weak_step(), m, g), StepSizeError);
    g.time_step = 0.2;
    CHECK_THROWS_AS(propagate_pulse(weak_step(), m, g), StepSizeError);
    g = {};
    g.z_steps = 10;
    CHECK_THROWS_AS(propagate_pulse(weak_step(), m, g), ResolutionError);
    g.z_steps = 20;
    CHECK_NOTHROW(propagate_pulse(weak_step(), m, g));

    CHECK(resolve_z_steps(0.5, 0) == 50);
    CHECK(resolve_z_steps(4.0, 0) == 80);
    CHECK(resolve_z_steps(4.0, 123) == 123);
    CHECK_THROWS_AS(evolve_density_matrix(constant_drive(1e-3, 0.01, 1.0), 0.0, -0.01), StepSizeError);
}

TEST_CASE("detuned weak-field steady optical depth is Lorentzian")
{
    CHECK(detuned_steady_optical_depth(1.0, 0.5) == doctest::Approx(0.5));
    MaxwellBlochConfig c;
    c.pulse = weak_step(0.5);
    c.medium.sigma_ss = 0.4;
    c.grid.duration = 40.0;
    const TransmissionTrace tr = simulate_transmission(c);
    // The field also picks up a phase; only the intensity ratio enters.
    CHECK(std::log(tr.input.back() / tr.output.back()) == doctest::Approx(0.2).epsilon(1e-6));
}
