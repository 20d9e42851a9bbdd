#include "subabsorb/core.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "subabsorb/errors.hpp"

namespace subabsorb {

namespace {

// erfinv(0.8): the 10%-90% span of an erf edge is 2 * erfinv(0.8) widths.
constexpr double kErfInv08 = 0.9061938024368233;

}  // namespace

double AtomicSpecies::density_per_cm3(double per_lambda3) const
{
    const double l = wavelength_cm();
    return per_lambda3 / (l * l * l);
}

double AtomicSpecies::density_per_lambda3(double per_cm3) const
{
    const double l = wavelength_cm();
    return per_cm3 * l * l * l;
}

void AtomicSpecies::validate() const
{
    if (!(lifetime_s > 0.0) || !(wavelength_m > 0.0)) {
        throw ConfigError("atomic species: lifetime and wavelength must be positive");
    }
}

void PulseShape::validate() const
{
    if (!(rise_10_90 >= 0.0)) {
        throw ConfigError("pulse: rise_10_90 must be non-negative");
    }
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
        throw ConfigError("pulse: amplitude must be finite and non-negative");
    }
    if (!std::isfinite(detuning)) {
        throw ConfigError("pulse: detuning must be finite");
    }
    if (amplitude > 0.1) {
        std::cerr << "warning: Rabi amplitude " << amplitude
                  << " Gamma_a is outside the weak-excitation regime\n";
    }
}

cplx PulseShape::rabi(double t) const
{
    if (kind == PulseKind::Step || rise_10_90 == 0.0) {
        return t >= 0.0 ? cplx(amplitude, 0.0) : cplx(0.0, 0.0);
    }
    const double width = rise_10_90 / (2.0 * kErfInv08);
    const double intensity = 0.5 * (1.0 + std::erf((t - rise_10_90) / width));
    return {amplitude * std::sqrt(intensity), 0.0};
}

double Box::smallest_side() const
{
    return std::min({x, y, z});
}

void EnsembleConfig::validate() const
{
    if (atom_count < 1) {
        throw ConfigError("ensemble: atom_count must be at least 1");
    }
    if (!(box.x > 0.0) || !(box.y > 0.0) || !(box.z > 0.0)) {
        throw ConfigError("ensemble: box sides must be positive");
    }
    if (!(min_pair_separation >= 0.0) || !(min_pair_separation < box.smallest_side())) {
        throw ConfigError("ensemble: min_pair_separation must lie in [0, smallest side)");
    }
    if (!(beta_over_2pi >= 0.0)) {
        throw ConfigError("ensemble: beta must be non-negative");
    }
    if (realization_count < 1) {
        throw ConfigError("ensemble: realization_count must be at least 1");
    }
}

double EnsembleConfig::density() const
{
    return static_cast<double>(atom_count) / box.volume();
}

double EnsembleConfig::gamma_dd(const AtomicSpecies& species) const
{
    return gamma_dd_from_beta(beta_over_2pi, species.density_per_cm3(density()), species);
}

double gamma_dd_from_beta(double beta_over_2pi, double density, const AtomicSpecies& species)
{
    if (!(beta_over_2pi >= 0.0) || !(density >= 0.0)) {
        throw DomainError("gamma_dd_from_beta: inputs must be non-negative");
    }
    return kTwoPi * beta_over_2pi * density * species.lifetime_s;
}

double dephasing_suppression(double gamma_dd)
{
    return 1.0 / (1.0 + gamma_dd * gamma_dd);
}

DerivedOpticalDepth optical_depth_from_geometry(const EnsembleConfig& config)
{
    const double volume = config.box.volume();
    if (!(volume > 0.0)) {
        throw DomainError("optical_depth_from_geometry: zero volume");
    }
    DerivedOpticalDepth od;
    od.length = config.box.z;
    od.sigma_ss = static_cast<double>(config.atom_count) / volume * od.cross_section * od.length;
    return od;
}

double cube_side_for_optical_depth(int atom_count, double sigma_ss)
{
    if (atom_count < 1 || !(sigma_ss > 0.0)) {
        throw DomainError("cube_side_for_optical_depth: need atom_count >= 1 and sigma_ss > 0");
    }
    return std::sqrt(3.0 * atom_count / (kTwoPi * sigma_ss));
}

}  // namespace subabsorb
