#include "subabsorb/coupled_dipole.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "subabsorb/errors.hpp"
#include "subabsorb/parallel.hpp"

namespace subabsorb {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr long kMaxConsecutiveRejections = 1'000'000;
constexpr double kMaxEigenvectorCondition = 1e8;
constexpr Eigen::Index kMaxEigenRoute = 1000;

// The angular bracket of F_jk; F_jk = -(3i/4) bracket with Gamma_a = 1.
double coupling_bracket(double x, double cos_theta)
{
    const double c2 = cos_theta * cos_theta;
    const double s = std::sin(x);
    const double sinc = s / x;
    double near;
    if (x < 1e-2) {
        // cos x / x^2 - sin x / x^3 = -(1/3 - x^2/30 + x^4/840 - ...)
        const double x2 = x * x;
        near = -(1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0);
    } else {
        near = std::cos(x) / (x * x) - s / (x * x * x);
    }
    return (1.0 - c2) * sinc + (1.0 - 3.0 * c2) * near;
}

double separation_cosine(const Eigen::Vector3d& r, double dist, const Eigen::Vector3d& polarization,
                         CouplingMode mode)
{
    if (mode == CouplingMode::Scalar) {
        return 1.0;
    }
    return polarization.dot(r) / (dist * polarization.norm());
}

// (1 - exp(-lambda t)) / lambda, finite as lambda -> 0.
inline double rise_kernel(double lambda, double t)
{
    const double x = lambda * t;
    if (std::abs(x) < 1e-12) {
        return t;
    }
    return -std::expm1(-x) / lambda;
}

inline cplx rise_kernel(cplx lambda, double t)
{
    const cplx x = lambda * t;
    if (std::abs(x) < 1e-4) {
        return t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
    }
    return (1.0 - std::exp(-x)) / lambda;
}

void check_times(std::span<const double> t_points)
{
    for (std::size_t k = 0; k < t_points.size(); ++k) {
        if (!(t_points[k] >= 0.0) || (k > 0 && t_points[k] < t_points[k - 1])) {
            throw DomainError("time points must be non-negative and non-decreasing");
        }
    }
}

void check_perturbative(const Eigen::MatrixXcd& c)
{
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
        const double excitation = c.col(k).squaredNorm();
        if (excitation > kPerturbativeBound) {
            throw PerturbativeBoundError("sum |c_j|^2 = " + std::to_string(excitation) +
                                         " exceeds the single-excitation bound");
        }
    }
}

bool is_real_symmetric(const Eigen::MatrixXcd& h)
{
    return h.imag().cwiseAbs().maxCoeff() == 0.0 && h.real() == h.real().transpose();
}

void integrate_rk4(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& source, std::span<const double> t_points,
                   Eigen::MatrixXcd& c)
{
    const double norm_inf = h.cwiseAbs().rowwise().sum().maxCoeff();
    const double h_max = std::min(0.01, 0.5 / std::max(norm_inf, 1e-300));
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(h.rows());
    double now = 0.0;
    auto rhs = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return -h * v + source; };
    for (std::size_t k = 0; k < t_points.size(); ++k) {
        const double target = t_points[k];
        const double span = target - now;
        if (span > 0.0) {
            const auto steps = static_cast<long>(std::ceil(span / h_max));
            const double dt = span / static_cast<double>(steps);
            for (long s = 0; s < steps; ++s) {
                const Eigen::VectorXcd k1 = rhs(y);
                const Eigen::VectorXcd k2 = rhs(y + 0.5 * dt * k1);
                const Eigen::VectorXcd k3 = rhs(y + 0.5 * dt * k2);
                const Eigen::VectorXcd k4 = rhs(y + dt * k3);
                y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            now = target;
        }
        c.col(static_cast<Eigen::Index>(k)) = y;
    }
}

}  // namespace

std::uint64_t EnsembleRealization::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : positions) {
        for (int d = 0; d < 3; ++d) {
            unsigned char bytes[sizeof(double)];
            const double v = p[d];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

EnsembleRealization sample_positions(const EnsembleConfig& config, std::uint64_t seed)
{
    config.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0.0, config.box.x);
    std::uniform_real_distribution<double> uy(0.0, config.box.y);
    std::uniform_real_distribution<double> uz(0.0, config.box.z);
    const double r2_min = config.min_pair_separation * config.min_pair_separation;

    EnsembleRealization out;
    out.seed = seed;
    out.positions.reserve(static_cast<std::size_t>(config.atom_count));
    long rejections = 0;
    while (out.positions.size() < static_cast<std::size_t>(config.atom_count)) {
        const Eigen::Vector3d candidate(ux(rng), uy(rng), uz(rng));
        const bool clear = std::all_of(out.positions.begin(), out.positions.end(),
                                       [&](const Eigen::Vector3d& p) { return (p - candidate).squaredNorm() >= r2_min; });
        if (clear) {
            out.positions.push_back(candidate);
            rejections = 0;
        } else if (++rejections > kMaxConsecutiveRejections) {
            throw DensityTooHighError("sample_positions: more than 1e6 consecutive rejections");
        }
    }

    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < out.positions.size(); ++j) {
        for (std::size_t k = j + 1; k < out.positions.size(); ++k) {
            d2 = std::min(d2, (out.positions[j] - out.positions[k]).squaredNorm());
        }
    }
    out.min_pair_distance = std::sqrt(d2);
    return out;
}

cplx coupling_f(const Eigen::Vector3d& r, const Eigen::Vector3d& polarization, CouplingMode mode,
                double min_separation)
{
    const double dist = r.norm();
    if (!(dist > 0.0) || dist < min_separation) {
        throw DomainError("coupling_f: separation " + std::to_string(dist) + " below the minimum");
    }
    const double x = kTwoPi * dist;
    const double bracket = coupling_bracket(x, separation_cosine(r, dist, polarization, mode));
    return {0.0, -0.75 * bracket};
}

CouplingMatrix build_coupling_matrix(const EnsembleRealization& realization, double gamma_dd, CouplingMode mode,
                                     const Eigen::Vector3d& polarization, double min_separation)
{
    const auto n = static_cast<Eigen::Index>(realization.size());
    CouplingMatrix out;
    out.mode = mode;
    out.suppression = dephasing_suppression(gamma_dd);
    out.h = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.h(j, j) = 0.5;
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const Eigen::Vector3d r = realization.positions[k] - realization.positions[j];
            const cplx v = kI * coupling_f(r, polarization, mode, min_separation) * out.suppression;
            out.h(j, k) = v;
            out.h(k, j) = v;
        }
    }
    return out;
}

Eigen::VectorXcd drive_vector(const EnsembleRealization& realization, double amplitude)
{
    const auto n = static_cast<Eigen::Index>(realization.size());
    Eigen::VectorXcd out(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out(j) = amplitude * std::exp(kI * (kTwoPi * realization.positions[j].z()));
    }
    return out;
}

AmplitudeState evolve_closed_form(const CouplingMatrix& coupling, const Eigen::VectorXcd& drive,
                                  std::span<const double> t_points, EvolutionMethod method)
{
    const Eigen::MatrixXcd& h = coupling.h;
    const Eigen::Index n = h.rows();
    if (h.cols() != n || drive.size() != n) {
        throw DomainError("evolve_closed_form: dimension mismatch");
    }
    check_times(t_points);

    AmplitudeState out;
    out.t.assign(t_points.begin(), t_points.end());
    out.c = Eigen::MatrixXcd::Zero(n, static_cast<Eigen::Index>(t_points.size()));
    out.drive_amplitude = drive.cwiseAbs().maxCoeff();
    const Eigen::VectorXcd source = -kI * drive;

    if (method == EvolutionMethod::Auto) {
        method = (n <= kMaxEigenRoute) ? EvolutionMethod::Eigen : EvolutionMethod::Pade;
    }

    if (method == EvolutionMethod::Eigen && is_real_symmetric(h)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
        const Eigen::VectorXd& lambda = es.eigenvalues();
        const double lo = lambda.cwiseAbs().minCoeff();
        const double hi = lambda.cwiseAbs().maxCoeff();
        if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
            method = EvolutionMethod::Integrate;
        } else {
            const Eigen::MatrixXd& v = es.eigenvectors();
            const Eigen::VectorXcd projected = v.transpose().cast<cplx>() * source;
            const Eigen::MatrixXcd vc = v.cast<cplx>();
            Eigen::VectorXcd scaled(n);
            for (std::size_t k = 0; k < t_points.size(); ++k) {
                for (Eigen::Index m = 0; m < n; ++m) {
                    scaled(m) = projected(m) * rise_kernel(lambda(m), t_points[k]);
                }
                out.c.col(static_cast<Eigen::Index>(k)) = vc * scaled;
            }
            out.steady = vc * (projected.array() / lambda.array().cast<cplx>()).matrix();
            out.method = EvolutionMethod::Eigen;
        }
    } else if (method == EvolutionMethod::Eigen) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h);
        const Eigen::VectorXcd& lambda = es.eigenvalues();
        const Eigen::MatrixXcd& v = es.eigenvectors();
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(v).singularValues();
        const double v_cond = sv(0) / sv(sv.size() - 1);
        const double lo = lambda.cwiseAbs().minCoeff();
        const double hi = lambda.cwiseAbs().maxCoeff();
        if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
            method = EvolutionMethod::Integrate;
        } else if (!(v_cond < kMaxEigenvectorCondition)) {
            method = EvolutionMethod::Pade;
        } else {
            const Eigen::VectorXcd projected = v.partialPivLu().solve(source);
            Eigen::VectorXcd scaled(n);
            for (std::size_t k = 0; k < t_points.size(); ++k) {
                for (Eigen::Index m = 0; m < n; ++m) {
                    scaled(m) = projected(m) * rise_kernel(lambda(m), t_points[k]);
                }
                out.c.col(static_cast<Eigen::Index>(k)) = v * scaled;
            }
            out.steady = v * (projected.array() / lambda.array()).matrix();
            out.method = EvolutionMethod::Eigen;
        }
    }

    if (method == EvolutionMethod::Pade) {
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(h);
        const double rcond = lu.rcond();
        if (!(rcond > 0.0) || 1.0 / rcond > kMaxConditionNumber) {
            method = EvolutionMethod::Integrate;
        } else {
            const Eigen::VectorXcd x = lu.solve(source);
            for (std::size_t k = 0; k < t_points.size(); ++k) {
                const Eigen::MatrixXcd decay = (-h * t_points[k]).exp();
                out.c.col(static_cast<Eigen::Index>(k)) = x - decay * x;
            }
            out.steady = x;
            out.method = EvolutionMethod::Pade;
        }
    }

    if (method == EvolutionMethod::Integrate) {
        integrate_rk4(h, source, t_points, out.c);
        const Eigen::VectorXcd x = h.fullPivLu().solve(source);
        if (x.allFinite() && out.c.cols() > 0) {
            out.steady = x;
        } else {
            out.steady = out.c.col(out.c.cols() - 1);
        }
        out.method = EvolutionMethod::Integrate;
    }

    check_perturbative(out.c);
    return out;
}

DipoleTrace dipole_trace(const AmplitudeState& state, const EnsembleRealization& realization)
{
    const auto n = static_cast<Eigen::Index>(realization.size());
    if (state.c.rows() != n) {
        throw DomainError("dipole_trace: realization does not match amplitude state");
    }
    check_perturbative(state.c);
    Eigen::VectorXcd reference(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        reference(j) = std::exp(-kI * (kTwoPi * realization.positions[j].z()));
    }
    const double steady = std::abs(reference.cwiseProduct(state.steady).sum());
    if (!(steady >= 1e-15 * static_cast<double>(n) * state.drive_amplitude) || steady == 0.0) {
        throw DegenerateTraceError("dipole_trace: steady-state dipole vanishes");
    }
    DipoleTrace out;
    out.t = state.t;
    out.steady_magnitude = steady;
    out.p.resize(state.t.size());
    for (Eigen::Index k = 0; k < state.c.cols(); ++k) {
        out.p[static_cast<std::size_t>(k)] = std::abs(reference.cwiseProduct(state.c.col(k)).sum()) / steady;
    }
    return out;
}

ExchangeSpectrum::ExchangeSpectrum(const EnsembleRealization& realization, CouplingMode mode,
                                   const Eigen::Vector3d& polarization, double min_separation)
{
    const auto n = static_cast<Eigen::Index>(realization.size());
    Eigen::MatrixXd exchange = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const Eigen::Vector3d r = realization.positions[k] - realization.positions[j];
            // i F_jk is real.
            const double v = (kI * coupling_f(r, polarization, mode, min_separation)).real();
            exchange(j, k) = v;
            exchange(k, j) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(exchange);
    kappa_ = es.eigenvalues();
    Eigen::VectorXd phase_cos(n);
    Eigen::VectorXd phase_sin(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double phase = kTwoPi * realization.positions[j].z();
        phase_cos(j) = std::cos(phase);
        phase_sin(j) = std::sin(phase);
    }
    const Eigen::VectorXd re = es.eigenvectors().transpose() * phase_cos;
    const Eigen::VectorXd im = es.eigenvectors().transpose() * phase_sin;
    weights_ = re.cwiseAbs2() + im.cwiseAbs2();
}

DipoleTrace ExchangeSpectrum::dipole_trace(double gamma_dd, double amplitude, std::span<const double> t_points) const
{
    check_times(t_points);
    const double s = dephasing_suppression(gamma_dd);
    const Eigen::VectorXd lambda = (0.5 + s * kappa_.array()).matrix();
    const double lo = lambda.minCoeff();
    if (!(lo > 0.0) || lambda.cwiseAbs().maxCoeff() / lo > kMaxConditionNumber) {
        throw DomainError("exchange operator is not positive definite");
    }
    const double steady = (weights_.array() / lambda.array()).sum();
    const auto n = static_cast<double>(kappa_.size());
    if (!(amplitude * steady >= 1e-15 * n * amplitude) || steady == 0.0) {
        throw DegenerateTraceError("dipole_trace: steady-state dipole vanishes");
    }

    DipoleTrace out;
    out.t.assign(t_points.begin(), t_points.end());
    out.p.resize(t_points.size());
    out.steady_magnitude = amplitude * steady;
    for (std::size_t k = 0; k < t_points.size(); ++k) {
        double dipole = 0.0;
        double excitation = 0.0;
        for (Eigen::Index m = 0; m < kappa_.size(); ++m) {
            const double g = rise_kernel(lambda(m), t_points[k]);
            dipole += weights_(m) * g;
            excitation += weights_(m) * g * g;
        }
        if (amplitude * amplitude * excitation > kPerturbativeBound) {
            throw PerturbativeBoundError("sum |c_j|^2 exceeds the single-excitation bound");
        }
        out.p[k] = dipole / steady;
    }
    return out;
}

std::vector<double> default_dipole_times()
{
    std::vector<double> t(161);
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k] = static_cast<double>(k) / 20.0;
    }
    return t;
}

std::vector<EnsembleResult> run_ensemble_series(const CoupledDipoleConfig& config,
                                                std::span<const double> gamma_dd_values)
{
    config.ensemble.validate();
    const std::vector<double> t = config.t_points.empty() ? default_dipole_times() : config.t_points;
    const auto m = static_cast<std::size_t>(config.ensemble.realization_count);
    const std::size_t series = gamma_dd_values.size();

    // runs[g][i]
    std::vector<std::vector<RealizationRun>> runs(series, std::vector<RealizationRun>(m));
    parallel_for(m, config.threads, [&](std::size_t i) {
        const std::uint64_t seed = config.ensemble.seed + i;
        const EnsembleRealization realization = sample_positions(config.ensemble, seed);
        const ExchangeSpectrum spectrum(realization, config.mode, config.polarization,
                                        config.ensemble.min_pair_separation);
        for (std::size_t g = 0; g < series; ++g) {
            RealizationRun& run = runs[g][i];
            run.seed = seed;
            run.positions_hash = realization.hash();
            run.min_pair_distance = realization.min_pair_distance;
            run.trace = spectrum.dipole_trace(gamma_dd_values[g], config.amplitude, t);
        }
    });

    const double sigma_ss = optical_depth_from_geometry(config.ensemble).sigma_ss;
    std::vector<EnsembleResult> out(series);
    for (std::size_t g = 0; g < series; ++g) {
        EnsembleResult& r = out[g];
        r.t = t;
        r.gamma_dd = gamma_dd_values[g];
        r.sigma_ss = sigma_ss;
        r.mean.assign(t.size(), 0.0);
        r.standard_error.assign(t.size(), 0.0);
        for (std::size_t k = 0; k < t.size(); ++k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                sum += runs[g][i].trace.p[k];
            }
            const double mean = sum / static_cast<double>(m);
            double ss = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = runs[g][i].trace.p[k] - mean;
                ss += d * d;
            }
            r.mean[k] = mean;
            r.standard_error[k] = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
        }
        r.runs = std::move(runs[g]);
    }
    return out;
}

EnsembleResult run_ensemble(const CoupledDipoleConfig& config)
{
    const double gamma = config.ensemble.gamma_dd();
    auto series = run_ensemble_series(config, std::span<const double>(&gamma, 1));
    return std::move(series.front());
}

}  // namespace subabsorb
