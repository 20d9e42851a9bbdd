#pragma once

// Domain types and unit conventions shared by every solver.
//
// Internally everything is expressed in natural units of the two-level
// transition: rates in units of the decay rate Gamma_a, times in units of
// the excited-state lifetime tau_a = 1/Gamma_a, and lengths in units of the
// wavelength lambda_a. SI values only enter at configuration parsing and
// output labelling, through AtomicSpecies.

#include <array>
#include <complex>
#include <cstdint>
#include <numbers>

namespace subabsorb {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Transition constants of the two-level atom. Defaults are the 87Rb D2 line.
struct AtomicSpecies {
    double lifetime_s = 26.2e-9;
    double wavelength_m = 780e-9;

    double decay_rate() const { return 1.0 / lifetime_s; }       // rad/s
    double wavevector() const { return kTwoPi / wavelength_m; }  // 1/m
    double wavelength_cm() const { return wavelength_m * 100.0; }

    double to_natural_time(double seconds) const { return seconds / lifetime_s; }
    double to_seconds(double natural_time) const { return natural_time * lifetime_s; }
    double to_ns(double natural_time) const { return natural_time * lifetime_s * 1e9; }
    double from_ns(double ns) const { return ns * 1e-9 / lifetime_s; }

    double to_natural_rate(double rad_per_s) const { return rad_per_s * lifetime_s; }
    double to_rad_per_s(double natural_rate) const { return natural_rate / lifetime_s; }

    double to_natural_length(double meters) const { return meters / wavelength_m; }
    double to_meters(double natural_length) const { return natural_length * wavelength_m; }

    /// Atoms per lambda^3 -> atoms per cm^3.
    double density_per_cm3(double per_lambda3) const;
    /// Atoms per cm^3 -> atoms per lambda^3.
    double density_per_lambda3(double per_cm3) const;

    void validate() const;
};

enum class PulseKind { Step, SmoothRamp };

/// Input drive. Times in tau_a, rates in Gamma_a.
///
/// The smooth ramp is an error-function intensity edge whose 10%-90% rise
/// equals `rise_10_90` and whose half-intensity point sits at t = rise_10_90,
/// so the field is essentially off at t = 0.
struct PulseShape {
    PulseKind kind = PulseKind::SmoothRamp;
    double rise_10_90 = 8.0 / 26.2;
    double amplitude = 1e-3;
    double detuning = 0.0;

    void validate() const;
    /// Rabi frequency Omega(t) at the entrance of the medium.
    cplx rabi(double t) const;
};

struct Box {
    double x = 1.0;
    double y = 1.0;
    double z = 1.0;

    double volume() const { return x * y * z; }
    double smallest_side() const;
};

/// Ensemble parameters. Lengths in lambda_a.
struct EnsembleConfig {
    int atom_count = 500;
    Box box{50.0, 50.0, 50.0};
    /// beta / 2pi in Hz cm^3.
    double beta_over_2pi = 0.0;
    double min_pair_separation = 0.05;
    std::uint64_t seed = 1;
    int realization_count = 10;

    void validate() const;
    /// Atoms per lambda^3.
    double density() const;
    /// gamma_DD in units of Gamma_a.
    double gamma_dd(const AtomicSpecies& species = {}) const;
};

struct DerivedOpticalDepth {
    double sigma_ss = 0.0;
    /// 3 lambda^2 / 2pi, in lambda^2.
    double cross_section = 3.0 / kTwoPi;
    /// Propagation length along z, in lambda.
    double length = 1.0;
};

/// gamma_DD = 2pi (beta/2pi) n as a multiple of Gamma_a.
/// `beta_over_2pi` in Hz cm^3, `density` in atoms per cm^3.
double gamma_dd_from_beta(double beta_over_2pi, double density, const AtomicSpecies& species = {});

/// Lorentzian suppression 1 / (1 + (gamma_DD/Gamma_a)^2) of the exchange couplings.
double dephasing_suppression(double gamma_dd);

/// sigma_ss = n sigma_0 a_z for a uniform box traversed along z.
DerivedOpticalDepth optical_depth_from_geometry(const EnsembleConfig& config);

/// Side of a cube holding `atom_count` atoms at steady-state optical depth `sigma_ss`.
double cube_side_for_optical_depth(int atom_count, double sigma_ss);

}  // namespace subabsorb
