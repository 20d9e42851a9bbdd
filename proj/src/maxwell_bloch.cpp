#include "subabsorb/maxwell_bloch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subabsorb/errors.hpp"

namespace subabsorb {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kMaxTimeStep = 0.1;
constexpr double kMaxAttenuationPerStep = 0.05;

struct BlochState {
    double rho00;
    double rho11;
    cplx rho01;
};

struct BlochRate {
    double d00;
    double d11;
    cplx d01;
};

// Gamma_a = 1.
inline BlochRate bloch_rhs(const BlochState& s, cplx rabi, cplx damping)
{
    const cplx exchange = 0.5 * kI * (rabi * std::conj(s.rho01) - std::conj(rabi) * s.rho01);
    return {
        s.rho11 + exchange.real(),
        -s.rho11 - exchange.real(),
        -damping * s.rho01 + 0.5 * kI * rabi * (s.rho11 - s.rho00),
    };
}

inline BlochState advance(const BlochState& s, const BlochRate& r, double h)
{
    return {s.rho00 + h * r.d00, s.rho11 + h * r.d11, s.rho01 + h * r.d01};
}

void check_time_step(double dt)
{
    if (!(dt > 0.0) || dt > kMaxTimeStep) {
        throw StepSizeError("time step " + std::to_string(dt) + " outside (0, 0.1] tau_a");
    }
}

// Classical RK4 from the ground state; `sink(k, state)` receives every sample.
template <class Sink>
void integrate_bloch(std::span<const cplx> rabi, cplx damping, double dt, Sink&& sink)
{
    BlochState s{1.0, 0.0, {0.0, 0.0}};
    if (rabi.empty()) {
        return;
    }
    sink(std::size_t{0}, s);
    const double h6 = dt / 6.0;
    for (std::size_t k = 0; k + 1 < rabi.size(); ++k) {
        const cplx w0 = rabi[k];
        const cplx w1 = rabi[k + 1];
        const cplx wm = 0.5 * (w0 + w1);
        const BlochRate k1 = bloch_rhs(s, w0, damping);
        const BlochRate k2 = bloch_rhs(advance(s, k1, 0.5 * dt), wm, damping);
        const BlochRate k3 = bloch_rhs(advance(s, k2, 0.5 * dt), wm, damping);
        const BlochRate k4 = bloch_rhs(advance(s, k3, dt), w1, damping);
        s.rho00 += h6 * (k1.d00 + 2.0 * k2.d00 + 2.0 * k3.d00 + k4.d00);
        s.rho11 += h6 * (k1.d11 + 2.0 * k2.d11 + 2.0 * k3.d11 + k4.d11);
        s.rho01 += h6 * (k1.d01 + 2.0 * k2.d01 + 2.0 * k3.d01 + k4.d01);
        sink(k + 1, s);
    }
}

}  // namespace

BlochSeries evolve_density_matrix(std::span<const cplx> rabi, double detuning, double dt)
{
    check_time_step(dt);
    const std::size_t n = rabi.size();
    BlochSeries out;
    out.rho00.resize(n);
    out.rho11.resize(n);
    out.rho01.resize(n);
    integrate_bloch(rabi, cplx{0.5, detuning}, dt, [&](std::size_t k, const BlochState& s) {
        out.rho00[k] = s.rho00;
        out.rho11[k] = s.rho11;
        out.rho01[k] = s.rho01;
    });
    return out;
}

int resolve_z_steps(double sigma_ss, int requested)
{
    if (requested > 0) {
        return requested;
    }
    return std::max(50, static_cast<int>(std::ceil(20.0 * sigma_ss)));
}

FieldGrid propagate_pulse(const PulseShape& pulse, const DerivedOpticalDepth& medium, const GridSpec& grid)
{
    pulse.validate();
    check_time_step(grid.time_step);
    if (!(medium.sigma_ss >= 0.0) || !(medium.length > 0.0)) {
        throw DomainError("propagate_pulse: need sigma_ss >= 0 and length > 0");
    }
    if (!(grid.duration > 0.0)) {
        throw DomainError("propagate_pulse: duration must be positive");
    }

    const int z_steps = resolve_z_steps(medium.sigma_ss, grid.z_steps);
    const double dz = medium.length / z_steps;
    const double alpha = medium.sigma_ss / medium.length;
    if (alpha * dz > kMaxAttenuationPerStep) {
        throw ResolutionError("propagate_pulse: alpha dz = " + std::to_string(alpha * dz) + " exceeds 0.05");
    }

    const auto nt = static_cast<std::size_t>(std::llround(grid.duration / grid.time_step)) + 1;
    const std::size_t nz = static_cast<std::size_t>(z_steps) + 1;

    FieldGrid g;
    g.t.resize(nt);
    g.z.resize(nz);
    for (std::size_t k = 0; k < nt; ++k) {
        g.t[k] = static_cast<double>(k) * grid.time_step;
    }
    for (std::size_t j = 0; j < nz; ++j) {
        g.z[j] = static_cast<double>(j) * dz;
    }
    g.rabi.resize(nz * nt);
    g.rho00.resize(nz * nt);
    g.rho11.resize(nz * nt);
    g.rho01.resize(nz * nt);

    for (std::size_t k = 0; k < nt; ++k) {
        g.rabi[k] = pulse.rabi(g.t[k]);
    }

    // dOmega/dz = -i (alpha/2) rho01 with Gamma_a = 1.
    const cplx coupling = -kI * (0.5 * alpha);
    const cplx damping{0.5, pulse.detuning};
    std::vector<cplx> stage(nt);
    std::vector<cplx> k1(nt), k2(nt), k3(nt), k4(nt);

    auto store_slice = [&](std::size_t iz) {
        const auto series = evolve_density_matrix(g.rabi_at(iz), pulse.detuning, grid.time_step);
        const std::size_t base = iz * nt;
        for (std::size_t k = 0; k < nt; ++k) {
            g.rho00[base + k] = series.rho00[k];
            g.rho11[base + k] = series.rho11[k];
            g.rho01[base + k] = series.rho01[k];
        }
    };
    auto derivative = [&](std::span<const cplx> field, std::vector<cplx>& out) {
        integrate_bloch(field, damping, grid.time_step,
                        [&](std::size_t k, const BlochState& s) { out[k] = coupling * s.rho01; });
    };

    store_slice(0);
    for (std::size_t j = 0; j + 1 < nz; ++j) {
        const std::span<const cplx> here = g.rabi_at(j);
        for (std::size_t k = 0; k < nt; ++k) {
            k1[k] = coupling * g.rho01[j * nt + k];
        }
        for (std::size_t k = 0; k < nt; ++k) {
            stage[k] = here[k] + 0.5 * dz * k1[k];
        }
        derivative(stage, k2);
        for (std::size_t k = 0; k < nt; ++k) {
            stage[k] = here[k] + 0.5 * dz * k2[k];
        }
        derivative(stage, k3);
        for (std::size_t k = 0; k < nt; ++k) {
            stage[k] = here[k] + dz * k3[k];
        }
        derivative(stage, k4);
        cplx* next = g.rabi.data() + (j + 1) * nt;
        for (std::size_t k = 0; k < nt; ++k) {
            next[k] = here[k] + (dz / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        store_slice(j + 1);
    }
    return g;
}

cplx analytic_weak_field(cplx rabi_in, double t, double z, const DerivedOpticalDepth& medium)
{
    const double alpha = medium.sigma_ss / medium.length;
    return rabi_in * std::exp(-0.5 * alpha * z * (-std::expm1(-0.5 * t)));
}

TransmissionTrace simulate_transmission(const MaxwellBlochConfig& config)
{
    const FieldGrid g = propagate_pulse(config.pulse, config.medium, config.grid);
    TransmissionTrace trace;
    trace.t = g.t;
    trace.input.resize(g.nt());
    trace.output.resize(g.nt());
    const auto in = g.rabi_at(0);
    const auto out = g.rabi_at(g.nz() - 1);
    for (std::size_t k = 0; k < g.nt(); ++k) {
        trace.input[k] = std::norm(in[k]);
        trace.output[k] = std::norm(out[k]);
    }
    return trace;
}

double detuned_steady_optical_depth(double sigma_ss, double detuning)
{
    return sigma_ss / (1.0 + 4.0 * detuning * detuning);
}

}  // namespace subabsorb
