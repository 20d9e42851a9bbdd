#pragma once

// Non-interacting gas: two-level Bloch equations in local time coupled to
// slowly-varying-envelope propagation along z, solved by the method of lines.

#include <cstddef>
#include <span>
#include <vector>

#include "subabsorb/core.hpp"

namespace subabsorb {

/// Time series of the density-matrix elements of one atom (or one z slice).
struct BlochSeries {
    std::vector<double> rho00;
    std::vector<double> rho11;
    std::vector<cplx> rho01;
};

struct GridSpec {
    double duration = 8.0;
    double time_step = 1.0 / 200.0;
    /// 0 selects max(50, ceil(20 sigma_ss)).
    int z_steps = 0;
};

/// Space-time samples of the field and the medium. Row-major in (z, t).
struct FieldGrid {
    std::vector<double> z;
    std::vector<double> t;
    std::vector<cplx> rabi;
    std::vector<double> rho00;
    std::vector<double> rho11;
    std::vector<cplx> rho01;

    std::size_t nz() const { return z.size(); }
    std::size_t nt() const { return t.size(); }
    std::size_t index(std::size_t iz, std::size_t it) const { return iz * t.size() + it; }
    std::span<const cplx> rabi_at(std::size_t iz) const { return {rabi.data() + iz * nt(), nt()}; }
    std::span<const cplx> rho01_at(std::size_t iz) const { return {rho01.data() + iz * nt(), nt()}; }
};

/// Normalized intensities |Omega|^2 (units of Gamma_a^2) before and after the medium.
struct TransmissionTrace {
    std::vector<double> t;
    std::vector<double> input;
    std::vector<double> output;
};

struct MaxwellBlochConfig {
    PulseShape pulse;
    DerivedOpticalDepth medium;
    GridSpec grid;
};

/// Integrates the Bloch equations with classical RK4 from the ground state.
/// `rabi[k]` is the drive at t = k dt; mid-step values are linearly interpolated.
/// Detuning enters the coherence as -(1/2 + i detuning) rho01.
BlochSeries evolve_density_matrix(std::span<const cplx> rabi, double detuning, double dt);

/// Marches the field from z = 0 to z = L. The propagation coefficient is fixed
/// so that alpha L = sigma_ss, i.e. the weak-field steady state transmits
/// exp(-sigma_ss) in intensity on resonance.
FieldGrid propagate_pulse(const PulseShape& pulse, const DerivedOpticalDepth& medium, const GridSpec& grid = {});

/// Closed-form weak-field, on-resonance field at depth z and local time t,
/// given the entrance value `rabi_in` = Omega(0, t).
cplx analytic_weak_field(cplx rabi_in, double t, double z, const DerivedOpticalDepth& medium);

/// Runs propagate_pulse and returns |Omega(0,t)|^2 and |Omega(L,t)|^2.
TransmissionTrace simulate_transmission(const MaxwellBlochConfig& config);

/// Number of z steps the solver uses for a given optical depth and request.
int resolve_z_steps(double sigma_ss, int requested);

/// Steady-state optical depth for a detuned weak drive: sigma_ss / (1 + 4 detuning^2).
double detuned_steady_optical_depth(double sigma_ss, double detuning);

}  // namespace subabsorb
