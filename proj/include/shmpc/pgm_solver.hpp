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
#ifndef SHMPC_PGM_SOLVER_HPP
#define SHMPC_PGM_SOLVER_HPP

#include "shmpc/box.hpp"
#include "shmpc/common.hpp"
#include "shmpc/condensing.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace shmpc {

struct SolveResult {
    Vector z;
    int iterations_run = 0;
    double cost = 0.0;
    /// Norm of the projected-gradient map (z - proj(z - s grad)) / s at the returned iterate.
    double grad_norm = 0.0;
};

enum class PgmMode {
    FixedIterations, ///< run exactly max_iters steps (bound certification)
    Tolerance,       ///< stop once ||z+ - z|| <= tolerance
};

struct PgmOptions {
    PgmMode mode = PgmMode::FixedIterations;
    double tolerance = 1e-10;
};

/// Fixed PGM step 1/(lambda_min + lambda_max); contraction factor (kappa - 1)/(kappa + 1).
inline double pgm_step(const CondensedQp& qp) { return 1.0 / (qp.lambda_min() + qp.lambda_max()); }

inline double pgm_rate(const CondensedQp& qp) {
    const double k = qp.kappa();
    return (k - 1.0) / (k + 1.0);
}

inline SolveResult pgm_solve(const CondensedQp& qp, const Vector& x, const Vector& z0, int max_iters,
                             const BoxConstraint& U, const PgmOptions& opts = {}) {
    detail::require(max_iters >= 0, ErrorCategory::Domain, "max_iters must be non-negative");
    detail::require(x.size() == qp.n() && z0.size() == qp.dim() && U.dim() == qp.m(), ErrorCategory::Dimension,
                    "pgm_solve: dimension mismatch");
    detail::require(box_feasible(z0, U), ErrorCategory::Infeasible, "initial iterate is not box-feasible");

    const double s = pgm_step(qp);
    const Vector Gx2 = 2.0 * (qp.G() * x);
    Vector z = z0;
    Vector next(z.size());
    int it = 0;
    for (; it < max_iters; ++it) {
        next.noalias() = -s * Gx2;
        next.noalias() += z;
        next.noalias() -= (2.0 * s) * (qp.H() * z);
        next = project_box(next, U);
        const double change = (next - z).norm();
        z.swap(next);
        if (opts.mode == PgmMode::Tolerance && change <= opts.tolerance) {
            ++it;
            break;
        }
    }
    SolveResult r;
    r.iterations_run = it;
    r.cost = eval_cost(qp, x, z);
    r.grad_norm = (z - project_box(z - s * qp.gradient(x, z), U)).norm() / s;
    r.z = std::move(z);
    return r;
}

/// High-accuracy solve from z = 0 (tolerance mode), used for V_{N-k}(x) and z*(x).
inline SolveResult solve_to_tolerance(const CondensedQp& qp, const Vector& x, const BoxConstraint& U,
                                      double tolerance = 1e-12, int max_iters = 5'000'000) {
    return pgm_solve(qp, x, Vector::Zero(qp.dim()), max_iters, U, {PgmMode::Tolerance, tolerance});
}

namespace detail {

inline int bound_from_ratio(double ratio, double rate) {
    if (!(ratio < 1.0)) {
        return 0;
    }
    if (ratio <= 0.0) {
        throw Error(ErrorCategory::Domain, "iteration bound needs a positive tolerance");
    }
    if (rate <= 0.0) {
        return 1; // kappa = 1: one step lands on the minimizer
    }
    const double l = std::ceil(std::log(ratio) / std::log(rate));
    return static_cast<int>(std::max(0.0, l));
}

} // namespace detail

/**
 * Cold-start (z0 = 0) iteration bound
 *   ceil( log( lambda_min^{1/2} e_bar / ||G x||_{H^{-1}} ) / log( (kappa-1)/(kappa+1) ) ).
 */
inline int iter_bound_cold(const CondensedQp& qp, const Vector& x, double e_bar) {
    detail::require(e_bar > 0.0, ErrorCategory::Domain, "e_bar must be positive");
    detail::require(x.size() == qp.n(), ErrorCategory::Dimension, "iter_bound_cold: state size mismatch");
    const Vector gx = qp.G() * x;
    const double gx_norm = qp.inverse_norm(gx);
    if (gx_norm == 0.0) {
        return 0;
    }
    return detail::bound_from_ratio(std::sqrt(qp.lambda_min()) * e_bar / gx_norm, pgm_rate(qp));
}

/**
 * Warm-start (shifted previous solution) iteration bound
 *   ceil( log( e_bar / ((1 + tau) e_bar_prev + sigma d_bar) ) / log( (kappa-1)/(kappa+1) ) ).
 */
inline int iter_bound_warm(const CondensedQp& qp, double e_bar, double e_bar_prev, double d_bar) {
    detail::require(e_bar > 0.0 && e_bar_prev >= 0.0 && d_bar >= 0.0, ErrorCategory::Domain,
                    "iter_bound_warm: invalid tolerances");
    const double start = (1.0 + qp.tau()) * e_bar_prev + qp.sigma() * d_bar;
    if (start == 0.0) {
        return 0;
    }
    return detail::bound_from_ratio(e_bar / start, pgm_rate(qp));
}

/// Per-iteration flop count for horizon h: hm(2hm - 1) + hm(2n - 1) + 5hm.
constexpr std::int64_t flops_per_iteration(std::int64_t horizon, std::int64_t m, std::int64_t n) {
    const std::int64_t hm = horizon * m;
    return hm * (2 * hm - 1) + hm * (2 * n - 1) + 5 * hm;
}

} // namespace shmpc

#endif // SHMPC_PGM_SOLVER_HPP
