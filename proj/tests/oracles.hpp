#pragma once

// Reference computations shared by the unit and acceptance tests. They avoid
// the library's own numerical routes on purpose.

#include <algorithm>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;

// Element-wise classical RK4 of dc/dt = -H c - i Omega from c = 0, sampled at t_out.
inline std::vector<std::vector<cplx>> rk4_amplitudes(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& omega,
                                                     const std::vector<double>& t_out, double dt)
{
    const auto n = static_cast<std::size_t>(h.rows());
    std::vector<cplx> c(n, 0.0);
    auto rhs = [&](const std::vector<cplx>& y) {
        std::vector<cplx> d(n);
        for (std::size_t j = 0; j < n; ++j) {
            cplx s = -cplx(0.0, 1.0) * omega(static_cast<Eigen::Index>(j));
            for (std::size_t k = 0; k < n; ++k) {
                s -= h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * y[k];
            }
            d[j] = s;
        }
        return d;
    };
    auto axpy = [&](const std::vector<cplx>& y, const std::vector<cplx>& d, double a) {
        std::vector<cplx> out(n);
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = y[j] + a * d[j];
        }
        return out;
    };
    std::vector<std::vector<cplx>> out;
    double t = 0.0;
    for (double target : t_out) {
        while (t < target - 1e-12) {
            const double step = std::min(dt, target - t);
            const auto k1 = rhs(c);
            const auto k2 = rhs(axpy(c, k1, step / 2));
            const auto k3 = rhs(axpy(c, k2, step / 2));
            const auto k4 = rhs(axpy(c, k3, step));
            for (std::size_t j = 0; j < n; ++j) {
                c[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            t += step;
        }
        out.push_back(c);
    }
    return out;
}

// Largest per-time-sample deviation relative to that sample's largest amplitude.
inline double max_relative_gap(const Eigen::MatrixXcd& c, const std::vector<std::vector<cplx>>& reference)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        double norm = 0.0, diff = 0.0;
        for (std::size_t j = 0; j < reference[k].size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const auto kk = static_cast<Eigen::Index>(k);
            norm = std::max(norm, std::abs(reference[k][j]));
            diff = std::max(diff, std::abs(c(jj, kk) - reference[k][j]));
        }
        if (norm > 0.0) {
            worst = std::max(worst, diff / norm);
        }
    }
    return worst;
}

}  // namespace oracle
