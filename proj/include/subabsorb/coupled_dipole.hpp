#pragma once

// Collective solver in the single-excitation subspace.
//
// The amplitudes c_j of "atom j excited" obey dc/dt = -H c - i Omega with
// H_jk = i F_jk S(gamma_DD) off the diagonal and H_jj = Gamma_a/2. For a step
// drive the solution is c(t) = (I - exp(-H t)) H^-1 (-i Omega).
//
// Units: lengths in lambda_a (k_a = 2 pi), rates in Gamma_a, times in tau_a.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "subabsorb/core.hpp"

namespace subabsorb {

enum class CouplingMode { Vectorial, Scalar };

struct EnsembleRealization {
    std::vector<Eigen::Vector3d> positions;
    std::uint64_t seed = 0;
    /// Smallest pair distance actually present (infinity for N = 1).
    double min_pair_distance = 0.0;

    std::size_t size() const { return positions.size(); }
    /// FNV-1a hash over the raw coordinates, for provenance records.
    std::uint64_t hash() const;
};

/// Uniform positions in the configured box with rejection of any point closer
/// than `min_pair_separation` to an accepted one. Deterministic in `seed`.
EnsembleRealization sample_positions(const EnsembleConfig& config, std::uint64_t seed);

/// Exchange coupling F_jk for separation `r` and dipole axis `polarization`.
/// Scalar mode evaluates the angular factors at theta = 0.
cplx coupling_f(const Eigen::Vector3d& r, const Eigen::Vector3d& polarization, CouplingMode mode,
                double min_separation = 0.0);

struct CouplingMatrix {
    Eigen::MatrixXcd h;
    CouplingMode mode = CouplingMode::Vectorial;
    double suppression = 1.0;
};

CouplingMatrix build_coupling_matrix(const EnsembleRealization& realization, double gamma_dd,
                                     CouplingMode mode = CouplingMode::Vectorial,
                                     const Eigen::Vector3d& polarization = Eigen::Vector3d::UnitX(),
                                     double min_separation = 0.0);

/// Plane wave along z: Omega_j = amplitude exp(i k_a z_j).
Eigen::VectorXcd drive_vector(const EnsembleRealization& realization, double amplitude);

enum class EvolutionMethod { Auto, Eigen, Pade, Integrate };

struct AmplitudeState {
    std::vector<double> t;
    /// N x T, column k holds c(t[k]).
    Eigen::MatrixXcd c;
    /// t -> infinity limit H^-1 (-i Omega).
    Eigen::VectorXcd steady;
    double drive_amplitude = 0.0;
    EvolutionMethod method = EvolutionMethod::Auto;
};

inline constexpr double kPerturbativeBound = 1e-2;
inline constexpr double kMaxConditionNumber = 1e12;

/// Step-drive solution of dc/dt = -H c - i drive on `t_points`.
/// Auto picks an eigendecomposition for real-symmetric H (N <= 1000) or a
/// well-conditioned diagonalizable H, a Pade scaling-and-squaring
/// exponential otherwise, and falls back to RK4 integration when H is
/// numerically singular. Throws PerturbativeBoundError if sum |c_j|^2 > 1e-2.
AmplitudeState evolve_closed_form(const CouplingMatrix& coupling, const Eigen::VectorXcd& drive,
                                  std::span<const double> t_points,
                                  EvolutionMethod method = EvolutionMethod::Auto);

struct DipoleTrace {
    std::vector<double> t;
    /// |sum_j c_j exp(-i k_a z_j)| normalized to its steady-state value.
    std::vector<double> p;
    double steady_magnitude = 0.0;
};

DipoleTrace dipole_trace(const AmplitudeState& state, const EnsembleRealization& realization);

/// Spectral form of the real-symmetric exchange operator of one realization.
///
/// H(gamma) = I/2 + S(gamma) K shares eigenvectors with the off-diagonal part
/// K, so one decomposition serves every dephasing value.
class ExchangeSpectrum {
public:
    ExchangeSpectrum(const EnsembleRealization& realization, CouplingMode mode,
                     const Eigen::Vector3d& polarization = Eigen::Vector3d::UnitX(),
                     double min_separation = 0.0);

    DipoleTrace dipole_trace(double gamma_dd, double amplitude, std::span<const double> t_points) const;

    const Eigen::VectorXd& exchange_eigenvalues() const { return kappa_; }
    /// |v_m . exp(i k z)|^2 for each eigenvector v_m.
    const Eigen::VectorXd& drive_weights() const { return weights_; }

private:
    Eigen::VectorXd kappa_;
    Eigen::VectorXd weights_;
};

struct RealizationRun {
    std::uint64_t seed = 0;
    std::uint64_t positions_hash = 0;
    double min_pair_distance = 0.0;
    DipoleTrace trace;
};

struct EnsembleResult {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> standard_error;
    double gamma_dd = 0.0;
    double sigma_ss = 0.0;
    std::vector<RealizationRun> runs;
};

struct CoupledDipoleConfig {
    EnsembleConfig ensemble;
    CouplingMode mode = CouplingMode::Vectorial;
    double amplitude = 1e-4;
    Eigen::Vector3d polarization = Eigen::Vector3d::UnitX();
    /// Empty selects 161 samples on [0, 8] (step 1/20).
    std::vector<double> t_points;
    int threads = 1;
};

std::vector<double> default_dipole_times();

/// Runs realization_count realizations with seeds seed + 0 .. seed + M - 1
/// and averages P(t) in seed order.
EnsembleResult run_ensemble(const CoupledDipoleConfig& config);

/// Same realizations evaluated at several dephasing rates (units of Gamma_a);
/// each realization is decomposed once.
std::vector<EnsembleResult> run_ensemble_series(const CoupledDipoleConfig& config,
                                                std::span<const double> gamma_dd_values);

}  // namespace subabsorb
