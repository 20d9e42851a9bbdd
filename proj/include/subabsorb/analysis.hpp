#pragma once

// Rise-time extraction: optical depth from intensity pairs, a bounded
// exponential fit over [tau_a, 8 tau_a], Poisson count synthesis and the
// Monte-Carlo spread of the fitted rise-time.

#include <cstdint>
#include <vector>

#include "subabsorb/coupled_dipole.hpp"
#include "subabsorb/maxwell_bloch.hpp"

namespace subabsorb {

struct OpticalDepthTrace {
    std::vector<double> t;
    std::vector<double> sigma;
    /// Per-point standard deviation; all zeros for noiseless simulations.
    std::vector<double> uncertainty;

    bool has_uncertainty() const;
};

/// Averaged photon counts per cycle with Poisson standard deviations.
struct CountTrace {
    TransmissionTrace intensities;
    std::vector<double> input_uncertainty;
    std::vector<double> output_uncertainty;
};

struct FitWindow {
    double start = 1.0;
    double end = 8.0;

    bool contains(double t) const { return t >= start - 1e-9 && t <= end + 1e-9; }
};

struct FitOptions {
    FitWindow window;
    /// Relative slack allowed on both endpoints.
    double endpoint_slack = 0.05;
    int max_iterations = 200;
    double tau_guess = 2.0;
    double tau_min = 0.1;
    double tau_max = 20.0;
};

struct RiseTimeFit {
    double tau = 0.0;
    double sigma_init = 0.0;
    double sigma_ss_fit = 0.0;
    FitWindow window;
    double residual_rms = 0.0;
    double chi2_reduced = 0.0;
    double tau_uncertainty = 0.0;
    int points = 0;
    int iterations = 0;
    bool bound_saturated = false;
};

/// sigma = ln(I_input / I_output). Points outside the fit window with a
/// non-positive intensity are reported as NaN; inside the window they throw
/// DegenerateTraceError.
OpticalDepthTrace optical_depth_trace(const TransmissionTrace& trace, const FitWindow& window = {});
OpticalDepthTrace optical_depth_trace(const CountTrace& counts, const FitWindow& window = {});

/// sigma(t) = sigma_ss P(t) for a normalized collective dipole trace.
OpticalDepthTrace optical_depth_from_dipole(const DipoleTrace& trace, double sigma_ss);
OpticalDepthTrace optical_depth_from_dipole(std::vector<double> t, const std::vector<double>& p, double sigma_ss);

/// Mean of sigma over the last tenth of the fit window.
double estimate_steady_state(const OpticalDepthTrace& trace, const FitWindow& window = {});

/// Weighted fit of sigma_ss_fit - (sigma_ss_fit - sigma_init) exp(-(t - t0)/tau)
/// with t0 the window start. Both endpoints are boxed to +/- slack around
/// their estimates; sigma_init's estimate comes from the data at t0.
RiseTimeFit fit_rise_time(const OpticalDepthTrace& trace, double sigma_ss_estimate, const FitOptions& options = {});

/// Poisson counts over `cycles` repetitions of a flat pulse carrying
/// `photons_per_pulse` photons over `pulse_duration`. The truth must be on a
/// uniform grid whose spacing is the detector bin width.
CountTrace synthesize_counts(const OpticalDepthTrace& truth, long long cycles, double photons_per_pulse,
                             std::uint64_t seed, double pulse_duration = 8.0);

/// Detector bin width used for synthetic data (4 ns), in tau_a.
double detector_bin_width(const AtomicSpecies& species = {});

/// sigma_ss (1 - exp(-t/tau)) sampled at bin centres on [0, duration].
OpticalDepthTrace exponential_rise_truth(double sigma_ss, double tau, double bin_width, double duration = 8.0);

struct MonteCarloResult {
    double tau_std = 0.0;
    double tau_mean = 0.0;
    int resamples = 0;
    int failures = 0;
};

/// Refits `resamples` Gaussian perturbations of the trace (resample i uses
/// seed + i) and reports the spread of tau. Throws UncertaintyUnreliableError
/// when more than 1% of the refits fail.
MonteCarloResult monte_carlo_uncertainty(const OpticalDepthTrace& trace, double sigma_ss_estimate,
                                         int resamples = 10000, std::uint64_t seed = 1,
                                         const FitOptions& options = {}, int threads = 1);

}  // namespace subabsorb
