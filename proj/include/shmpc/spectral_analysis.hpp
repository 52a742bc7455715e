/*
 Copyright 2026 The shmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#ifndef SHMPC_SPECTRAL_ANALYSIS_HPP
#define SHMPC_SPECTRAL_ANALYSIS_HPP

#include "shmpc/common.hpp"
#include "shmpc/condensing.hpp"
#include "shmpc/dynamics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <utility>
#include <vector>

namespace shmpc {

namespace detail {

inline double p_norm_sq(const Matrix& P, const Vector& v) { return v.dot(P * v); }

/// Relative gaps of the two extreme eigenvalues; a tie is a gap <= 1e-9 ||H||.
inline bool extreme_eigenvalues_simple(const Vector& ascending) {
    const Eigen::Index d = ascending.size();
    if (d < 2) {
        return true;
    }
    const double scale = std::max(std::abs(ascending(d - 1)), std::abs(ascending(0)));
    return (ascending(1) - ascending(0)) > 1e-9 * scale && (ascending(d - 1) - ascending(d - 2)) > 1e-9 * scale;
}

} // namespace detail

/// ||S v||_P^2 / ||v||_{H1}^2 along one direction, the ratio compared throughout the chain.
inline double terminal_share(const CondensedQp& at_weight, const CondensedQp& H1, const Vector& v) {
    const Vector Sv = at_weight.S_block(at_weight.horizon()) * v;
    return detail::p_norm_sq(at_weight.P(), Sv) / v.dot(H1.H() * v);
}

struct ChainLinks {
    double omega = 0.0;
    double min_share = 0.0;   ///< ||S v_min'||_P^2 / ||v_min'||_{H1}^2
    double max_share = 0.0;   ///< ||S v_max'||_P^2 / ||v_max'||_{H1}^2
    bool first = false;       ///< min_share < lhs
    bool third = false;       ///< rhs <= max_share
};

struct RatioConditionReport {
    int horizon = 0;
    double lhs = 0.0; ///< ||B||_P / ||R|| = lambda_max(B'PB) / chi
    double rhs = 0.0; ///< ||S v_max^0||_P^2 / ||v_max^0||_{H1}^2
    bool ratio_ok = false;
    bool eigen_gaps_ok = false;
    bool holds = false;
    std::vector<ChainLinks> chain;
    bool chain_ok = false;

    [[nodiscard]] double margin() const noexcept { return rhs - lhs; }
};

/**
 * Checks the sufficient condition for kappa(H) to increase with the terminal weight:
 * lambda_max(B'PB)/chi <= ||S_h v0||_P^2 / ||v0||^2_{H(omega'_0)} with v0 the top
 * eigenvector of H(0), plus simple extreme eigenvalues on a grid over (0, omega'_0].
 */
inline RatioConditionReport ratio_condition_check(const LtiModel& model, const CostWeights& w, int horizon,
                                           double omega_prime_0, int grid_points = 8) {
    const std::optional<double> chi = w.chi();
    detail::require(chi.has_value(), ErrorCategory::Domain, "R must be a positive multiple of the identity");
    detail::require(omega_prime_0 > 0.0 && grid_points >= 1, ErrorCategory::Domain, "invalid omega'_0 or grid");

    const CondensedQp H0 = condense_for_analysis(model, w, 0.0, horizon);
    const CondensedQp H1 = condense(model, w, omega_prime_0, horizon);

    RatioConditionReport r;
    r.horizon = horizon;
    r.lhs = detail::lambda_max_sym(model.B().transpose() * w.P * model.B()) / *chi;
    r.rhs = terminal_share(H0, H1, H0.v_max());
    r.ratio_ok = r.lhs <= r.rhs;

    r.eigen_gaps_ok = detail::extreme_eigenvalues_simple(H0.eigenvalues());
    r.chain_ok = true;
    for (int j = 1; j <= grid_points; ++j) {
        const double omega = omega_prime_0 * static_cast<double>(j) / grid_points;
        const CondensedQp Hw = condense(model, w, omega, horizon);
        r.eigen_gaps_ok = r.eigen_gaps_ok && detail::extreme_eigenvalues_simple(Hw.eigenvalues());
        ChainLinks c;
        c.omega = omega;
        c.min_share = terminal_share(Hw, H1, Hw.v_min());
        c.max_share = terminal_share(Hw, H1, Hw.v_max());
        c.first = c.min_share < r.lhs;
        c.third = r.rhs <= c.max_share * (1.0 + 1e-12);
        r.chain_ok = r.chain_ok && c.first && c.third;
        r.chain.push_back(c);
    }
    r.holds = r.ratio_ok && r.eigen_gaps_ok;
    return r;
}

struct SweepEntry {
    int k = 0;
    double omega = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double kappa = 1.0;
    double ratio_lhs = 0.0;
    double ratio_rhs = 0.0;
    bool gap_ok = true;
};

struct SweepReport {
    int k = 0;
    int horizon = 0;
    std::vector<SweepEntry> entries;
    bool ratio_condition_ok = false;
    /// lambda_l(H(omega_j)) <= lambda_l(H(omega_{j+1})) for every l, up to 1e-12 ||H||.
    bool spectrum_monotone = true;
    /// Count of ordered eigenvalue pairs whose increase exceeds 1e-12 ||H||.
    std::size_t strict_increases = 0;
    std::size_t eigenvalue_pairs = 0;
    /// Strict increase of kappa along the grid; only meaningful when ratio_condition_ok.
    bool kappa_monotone = true;
};

inline SweepReport kappa_sweep(const LtiModel& model, const CostWeights& w, int horizon,
                               const std::vector<double>& omega_grid, int k = 0) {
    detail::require(!omega_grid.empty(), ErrorCategory::Domain, "empty omega grid");
    for (std::size_t j = 0; j < omega_grid.size(); ++j) {
        detail::require(omega_grid[j] > 0.0 && (j == 0 || omega_grid[j] > omega_grid[j - 1]), ErrorCategory::Domain,
                        "omega grid must be positive and strictly ascending");
    }
    SweepReport rep;
    rep.k = k;
    rep.horizon = horizon;
    const RatioConditionReport ratio = ratio_condition_check(model, w, horizon, omega_grid.back());
    rep.ratio_condition_ok = ratio.holds;

    std::optional<CondensedQp> prev;
    for (double omega : omega_grid) {
        CondensedQp qp = condense(model, w, omega, horizon);
        SweepEntry e;
        e.k = k;
        e.omega = omega;
        e.lambda_min = qp.lambda_min();
        e.lambda_max = qp.lambda_max();
        e.kappa = qp.kappa();
        e.ratio_lhs = ratio.lhs;
        e.ratio_rhs = ratio.rhs;
        e.gap_ok = detail::extreme_eigenvalues_simple(qp.eigenvalues());
        if (prev) {
            const double tol = 1e-12 * qp.lambda_max();
            const Vector diff = qp.eigenvalues() - prev->eigenvalues();
            for (Eigen::Index l = 0; l < diff.size(); ++l) {
                ++rep.eigenvalue_pairs;
                if (diff(l) < -tol) {
                    rep.spectrum_monotone = false;
                }
                if (diff(l) > tol) {
                    ++rep.strict_increases;
                }
            }
            if (!(qp.kappa() > prev->kappa())) {
                rep.kappa_monotone = false;
            }
        }
        rep.entries.push_back(e);
        prev.emplace(std::move(qp));
    }
    return rep;
}

struct DerivativeCheck {
    bool skipped = false; ///< extreme eigenvalue tie at omega
    double fd_min = 0.0;
    double fd_max = 0.0;
    double analytic_min = 0.0; ///< ||S_h v_min||_P^2
    double analytic_max = 0.0; ///< ||S_h v_max||_P^2
    double rel_err_min = 0.0;
    double rel_err_max = 0.0;
    bool passed = false;
};

/// Central differences of the extreme eigenvalues in omega (step 1e-6 omega) against ||S_h v||_P^2.
inline DerivativeCheck eigen_derivative_check(const LtiModel& model, const CostWeights& w, int horizon, double omega,
                                              double rel_tol = 1e-4) {
    detail::require(omega > 0.0, ErrorCategory::Domain, "omega must be positive");
    const CondensedQp qp = condense(model, w, omega, horizon);
    DerivativeCheck d;
    if (!detail::extreme_eigenvalues_simple(qp.eigenvalues())) {
        d.skipped = true;
        return d;
    }
    // H is affine in omega; the difference quotient is taken along that family in extended precision
    // so rounding in the eigenvalues stays far below the step.
    using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const Matrix Sh = qp.S_block(horizon);
    const LMatrix H0 = condense_for_analysis(model, w, 0.0, horizon).H().cast<long double>();
    const LMatrix M = (Sh.transpose() * w.P * Sh).cast<long double>();
    const long double h = 1e-6L * omega;
    auto extremes = [&](long double om) {
        const LMatrix H = H0 + om * M;
        const Eigen::SelfAdjointEigenSolver<LMatrix> es(H, Eigen::EigenvaluesOnly);
        return std::pair{es.eigenvalues()(0), es.eigenvalues()(es.eigenvalues().size() - 1)};
    };
    const auto [up_min, up_max] = extremes(omega + h);
    const auto [dn_min, dn_max] = extremes(omega - h);
    d.fd_min = static_cast<double>((up_min - dn_min) / (2.0L * h));
    d.fd_max = static_cast<double>((up_max - dn_max) / (2.0L * h));
    d.analytic_min = detail::p_norm_sq(w.P, Sh * qp.v_min());
    d.analytic_max = detail::p_norm_sq(w.P, Sh * qp.v_max());
    // The near-zero case needs a floor on the denominator.
    const double floor = 1e-8 * qp.lambda_max() / omega;
    d.rel_err_min = std::abs(d.fd_min - d.analytic_min) / std::max(std::abs(d.analytic_min), floor);
    d.rel_err_max = std::abs(d.fd_max - d.analytic_max) / std::max(std::abs(d.analytic_max), floor);
    d.passed = d.rel_err_min <= rel_tol && d.rel_err_max <= rel_tol;
    return d;
}

/// Largest k with the ratio condition holding for every k' in [0, k]; -1 when it fails at k = 0.
inline int ratio_condition_horizon_limit(const LtiModel& model, const CostWeights& w, int N, double omega_prime_0,
                                     int grid_points = 4) {
    int last = -1;
    for (int k = 0; k < N; ++k) {
        if (!ratio_condition_check(model, w, N - k, omega_prime_0, grid_points).holds) {
            break;
        }
        last = k;
    }
    return last;
}

inline void write_sweep_csv(const std::vector<SweepReport>& reports, const std::filesystem::path& path) {
    std::ofstream out(path);
    detail::require(static_cast<bool>(out), ErrorCategory::Io, "cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "k,omega,lambda_min,lambda_max,kappa,ratio_lhs,ratio_rhs,gap_flag\n";
    for (const SweepReport& r : reports) {
        for (const SweepEntry& e : r.entries) {
            out << e.k << ',' << e.omega << ',' << e.lambda_min << ',' << e.lambda_max << ',' << e.kappa << ','
                << e.ratio_lhs << ',' << e.ratio_rhs << ',' << (e.gap_ok ? 1 : 0) << '\n';
        }
    }
    detail::require(static_cast<bool>(out), ErrorCategory::Io, "write failed for " + path.string());
}

} // namespace shmpc

#endif // SHMPC_SPECTRAL_ANALYSIS_HPP
