#include "subabsorb/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "subabsorb/errors.hpp"
#include "subabsorb/parallel.hpp"

namespace subabsorb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Span after the window start used to estimate sigma_init from noisy data.
constexpr double kInitialSpan = 0.75;

struct WindowData {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> w;  // 1 / u^2, or 1
};

WindowData select_window(const OpticalDepthTrace& trace, const FitWindow& window)
{
    const bool weighted = trace.has_uncertainty();
    WindowData d;
    for (std::size_t k = 0; k < trace.t.size(); ++k) {
        if (!window.contains(trace.t[k])) {
            continue;
        }
        const double y = trace.sigma[k];
        if (!std::isfinite(y)) {
            throw DegenerateTraceError("non-finite optical depth inside the fit window");
        }
        double w = 1.0;
        if (weighted) {
            const double u = trace.uncertainty[k];
            if (!(u > 0.0)) {
                throw DegenerateTraceError("zero uncertainty inside the fit window of a noisy trace");
            }
            w = 1.0 / (u * u);
        }
        d.t.push_back(trace.t[k]);
        d.y.push_back(y);
        d.w.push_back(w);
    }
    return d;
}

double initial_estimate(const WindowData& d, double t0, bool weighted)
{
    if (!weighted || d.t.size() < 3) {
        // Noiseless: the first window sample, linearly extrapolated back to t0
        // when the grid does not hit t0. Samples before the window are never used.
        if (d.t.size() < 2 || std::abs(d.t[0] - t0) <= 1e-9) {
            return d.y.front();
        }
        const double slope = (d.y[1] - d.y[0]) / (d.t[1] - d.t[0]);
        return d.y[0] + slope * (t0 - d.t[0]);
    }
    // Weighted straight line through the first samples, evaluated at t0.
    std::size_t n = 0;
    while (n < d.t.size() && (d.t[n] <= t0 + kInitialSpan || n < 3)) {
        ++n;
    }
    double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = d.t[k] - t0;
        sw += d.w[k];
        st += d.w[k] * x;
        sy += d.w[k] * d.y[k];
        stt += d.w[k] * x * x;
        sty += d.w[k] * x * d.y[k];
    }
    const double det = sw * stt - st * st;
    if (!(std::abs(det) > 0.0)) {
        return sy / sw;
    }
    return (stt * sy - st * sty) / det;
}

std::array<double, 2> slack_bounds(double estimate, double slack)
{
    const double a = estimate * (1.0 - slack);
    const double b = estimate * (1.0 + slack);
    return {std::min(a, b), std::max(a, b)};
}

double cost_of(const WindowData& d, double t0, const std::array<double, 3>& p, std::vector<double>* residuals = nullptr)
{
    double cost = 0.0;
    for (std::size_t k = 0; k < d.t.size(); ++k) {
        const double e = std::exp(-(d.t[k] - t0) / p[2]);
        const double r = d.y[k] - (p[1] - (p[1] - p[0]) * e);
        cost += d.w[k] * r * r;
        if (residuals != nullptr) {
            residuals->push_back(r);
        }
    }
    return cost;
}

}  // namespace

bool OpticalDepthTrace::has_uncertainty() const
{
    return std::any_of(uncertainty.begin(), uncertainty.end(), [](double u) { return u > 0.0; });
}

OpticalDepthTrace optical_depth_trace(const TransmissionTrace& trace, const FitWindow& window)
{
    CountTrace counts;
    counts.intensities = trace;
    counts.input_uncertainty.assign(trace.t.size(), 0.0);
    counts.output_uncertainty.assign(trace.t.size(), 0.0);
    return optical_depth_trace(counts, window);
}

OpticalDepthTrace optical_depth_trace(const CountTrace& counts, const FitWindow& window)
{
    const auto& tr = counts.intensities;
    const std::size_t n = tr.t.size();
    if (tr.input.size() != n || tr.output.size() != n || counts.input_uncertainty.size() != n ||
        counts.output_uncertainty.size() != n) {
        throw DomainError("optical_depth_trace: column lengths differ");
    }
    OpticalDepthTrace out;
    out.t = tr.t;
    out.sigma.resize(n);
    out.uncertainty.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double in = tr.input[k];
        const double o = tr.output[k];
        if (!(in > 0.0) || !(o > 0.0)) {
            if (window.contains(tr.t[k])) {
                throw DegenerateTraceError("non-positive intensity at t = " + std::to_string(tr.t[k]));
            }
            out.sigma[k] = kNaN;
            out.uncertainty[k] = kNaN;
            continue;
        }
        out.sigma[k] = std::log(in / o);
        const double ri = counts.input_uncertainty[k] / in;
        const double ro = counts.output_uncertainty[k] / o;
        out.uncertainty[k] = std::sqrt(ri * ri + ro * ro);
    }
    return out;
}

OpticalDepthTrace optical_depth_from_dipole(std::vector<double> t, const std::vector<double>& p, double sigma_ss)
{
    OpticalDepthTrace out;
    out.t = std::move(t);
    out.sigma.resize(p.size());
    out.uncertainty.assign(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
        out.sigma[k] = sigma_ss * p[k];
    }
    return out;
}

OpticalDepthTrace optical_depth_from_dipole(const DipoleTrace& trace, double sigma_ss)
{
    return optical_depth_from_dipole(trace.t, trace.p, sigma_ss);
}

double estimate_steady_state(const OpticalDepthTrace& trace, const FitWindow& window)
{
    const double from = window.end - 0.1 * (window.end - window.start);
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < trace.t.size(); ++k) {
        if (trace.t[k] >= from - 1e-9 && window.contains(trace.t[k]) && std::isfinite(trace.sigma[k])) {
            sum += trace.sigma[k];
            ++n;
        }
    }
    if (n == 0) {
        throw DegenerateTraceError("estimate_steady_state: no samples near the window end");
    }
    return sum / n;
}

RiseTimeFit fit_rise_time(const OpticalDepthTrace& trace, double sigma_ss_estimate, const FitOptions& options)
{
    if (trace.sigma.size() != trace.t.size() || trace.uncertainty.size() != trace.t.size()) {
        throw DomainError("fit_rise_time: column lengths differ");
    }
    const WindowData d = select_window(trace, options.window);
    if (d.t.size() < 10) {
        throw FitError("fit_rise_time: fewer than 10 points inside the window");
    }
    const double t0 = options.window.start;
    const bool weighted = trace.has_uncertainty();

    const double init_estimate = initial_estimate(d, t0, weighted);
    const auto init_bounds = slack_bounds(init_estimate, options.endpoint_slack);
    const auto ss_bounds = slack_bounds(sigma_ss_estimate, options.endpoint_slack);
    const std::array<double, 3> lower{init_bounds[0], ss_bounds[0], options.tau_min};
    const std::array<double, 3> upper{init_bounds[1], ss_bounds[1], options.tau_max};

    std::array<double, 3> p{init_estimate, sigma_ss_estimate, std::clamp(options.tau_guess, options.tau_min, options.tau_max)};
    double cost = cost_of(d, t0, p);
    double mu = 1e-3;
    const std::size_t n = d.t.size();
    int iter = 0;
    bool converged = false;

    while (!converged) {
        if (++iter > options.max_iterations) {
            std::vector<double> residuals;
            cost_of(d, t0, p, &residuals);
            throw FitError("fit_rise_time: no convergence after " + std::to_string(options.max_iterations) +
                               " iterations",
                           std::move(residuals));
        }
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (std::size_t k = 0; k < n; ++k) {
            const double dt = d.t[k] - t0;
            const double e = std::exp(-dt / p[2]);
            const double r = d.y[k] - (p[1] - (p[1] - p[0]) * e);
            const Eigen::Vector3d j(e, 1.0 - e, -(p[1] - p[0]) * e * dt / (p[2] * p[2]));
            jtj.noalias() += d.w[k] * j * j.transpose();
            jtr.noalias() += d.w[k] * r * j;
        }

        // Parameters pinned at a bound with the step pointing outward stay fixed.
        std::array<bool, 3> free{};
        for (int i = 0; i < 3; ++i) {
            const bool at_lo = p[i] <= lower[i] && jtr(i) <= 0.0;
            const bool at_hi = p[i] >= upper[i] && jtr(i) >= 0.0;
            free[i] = !(at_lo || at_hi) && upper[i] > lower[i];
        }

        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix3d a = jtj;
            Eigen::Vector3d g = jtr;
            for (int i = 0; i < 3; ++i) {
                a(i, i) += mu * std::max(jtj(i, i), 1e-300);
                if (!free[i]) {
                    a.row(i).setZero();
                    a.col(i).setZero();
                    a(i, i) = 1.0;
                    g(i) = 0.0;
                }
            }
            const Eigen::Vector3d step = a.ldlt().solve(g);
            std::array<double, 3> trial = p;
            for (int i = 0; i < 3; ++i) {
                trial[i] = std::clamp(p[i] + step(i), lower[i], upper[i]);
            }
            const double trial_cost = cost_of(d, t0, trial);
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                const double gain = cost - trial_cost;
                double moved = 0.0;
                for (int i = 0; i < 3; ++i) {
                    moved = std::max(moved, std::abs(trial[i] - p[i]) / (std::abs(p[i]) + 1e-12));
                }
                p = trial;
                cost = trial_cost;
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
                if (gain <= 1e-15 * cost || moved < 1e-13 || cost < 1e-30 * static_cast<double>(n)) {
                    converged = true;
                }
            } else {
                mu *= 4.0;
                if (mu > 1e16) {
                    // No descent direction left inside the box.
                    accepted = true;
                    converged = true;
                }
            }
        }
    }

    RiseTimeFit fit;
    fit.sigma_init = p[0];
    fit.sigma_ss_fit = p[1];
    fit.tau = p[2];
    fit.window = options.window;
    fit.points = static_cast<int>(n);
    fit.iterations = iter;
    std::vector<double> residuals;
    cost_of(d, t0, p, &residuals);
    double ss = 0.0;
    for (double r : residuals) {
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / static_cast<double>(n));
    fit.chi2_reduced = n > 3 ? cost / static_cast<double>(n - 3) : 0.0;
    fit.bound_saturated = p[2] <= options.tau_min * (1.0 + 1e-9) || p[2] >= options.tau_max * (1.0 - 1e-9);
    return fit;
}

double detector_bin_width(const AtomicSpecies& species)
{
    return species.from_ns(4.0);
}

OpticalDepthTrace exponential_rise_truth(double sigma_ss, double tau, double bin_width, double duration)
{
    if (!(bin_width > 0.0) || !(tau > 0.0)) {
        throw DomainError("exponential_rise_truth: bin width and tau must be positive");
    }
    const auto bins = static_cast<std::size_t>(std::floor(duration / bin_width + 1e-9));
    OpticalDepthTrace out;
    out.t.resize(bins);
    out.sigma.resize(bins);
    out.uncertainty.assign(bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) {
        out.t[k] = (static_cast<double>(k) + 0.5) * bin_width;
        out.sigma[k] = -sigma_ss * std::expm1(-out.t[k] / tau);
    }
    return out;
}

CountTrace synthesize_counts(const OpticalDepthTrace& truth, long long cycles, double photons_per_pulse,
                             std::uint64_t seed, double pulse_duration)
{
    if (cycles < 1 || !(photons_per_pulse > 0.0) || !(pulse_duration > 0.0)) {
        throw DomainError("synthesize_counts: need cycles >= 1, photons_per_pulse > 0, pulse_duration > 0");
    }
    if (truth.t.size() < 2) {
        throw DomainError("synthesize_counts: truth needs at least two bins");
    }
    const double bin = truth.t[1] - truth.t[0];
    if (!(bin > 0.0)) {
        throw DomainError("synthesize_counts: truth grid must be increasing");
    }
    const double per_cycle = photons_per_pulse * bin / pulse_duration;
    const double c = static_cast<double>(cycles);

    std::mt19937_64 rng(seed);
    CountTrace out;
    auto& tr = out.intensities;
    const std::size_t n = truth.t.size();
    tr.t = truth.t;
    tr.input.resize(n);
    tr.output.resize(n);
    out.input_uncertainty.resize(n);
    out.output_uncertainty.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double mean_in = c * per_cycle;
        const double mean_out = mean_in * std::exp(-truth.sigma[k]);
        // A sum of per-cycle Poisson counts is Poisson with the summed mean.
        std::poisson_distribution<long long> din(mean_in);
        std::poisson_distribution<long long> dout(mean_out);
        const auto nin = static_cast<double>(din(rng));
        const auto nout = static_cast<double>(dout(rng));
        tr.input[k] = nin / c;
        tr.output[k] = nout / c;
        out.input_uncertainty[k] = std::sqrt(nin) / c;
        out.output_uncertainty[k] = std::sqrt(nout) / c;
    }
    return out;
}

MonteCarloResult monte_carlo_uncertainty(const OpticalDepthTrace& trace, double sigma_ss_estimate, int resamples,
                                         std::uint64_t seed, const FitOptions& options, int threads)
{
    MonteCarloResult result;
    result.resamples = resamples;
    if (resamples < 2) {
        throw DomainError("monte_carlo_uncertainty: need at least two resamples");
    }
    if (!trace.has_uncertainty()) {
        result.tau_mean = fit_rise_time(trace, sigma_ss_estimate, options).tau;
        return result;
    }

    std::vector<double> taus(static_cast<std::size_t>(resamples), kNaN);
    parallel_for(taus.size(), threads, [&](std::size_t i) {
        std::mt19937_64 rng(seed + i);
        std::normal_distribution<double> gauss(0.0, 1.0);
        OpticalDepthTrace perturbed = trace;
        for (std::size_t k = 0; k < perturbed.sigma.size(); ++k) {
            const double u = perturbed.uncertainty[k];
            if (std::isfinite(u) && u > 0.0) {
                perturbed.sigma[k] += u * gauss(rng);
            }
        }
        try {
            taus[i] = fit_rise_time(perturbed, sigma_ss_estimate, options).tau;
        } catch (const FitError&) {
        } catch (const DegenerateTraceError&) {
        }
    });

    double sum = 0.0;
    int ok = 0;
    for (double tau : taus) {
        if (std::isfinite(tau)) {
            sum += tau;
            ++ok;
        }
    }
    result.failures = resamples - ok;
    if (result.failures * 100 > resamples) {
        throw UncertaintyUnreliableError("monte_carlo_uncertainty: " + std::to_string(result.failures) +
                                         " of " + std::to_string(resamples) + " refits failed");
    }
    result.tau_mean = sum / ok;
    double ss = 0.0;
    for (double tau : taus) {
        if (std::isfinite(tau)) {
            ss += (tau - result.tau_mean) * (tau - result.tau_mean);
        }
    }
    result.tau_std = std::sqrt(ss / (ok - 1));
    return result;
}

}  // namespace subabsorb
