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
#ifndef SHMPC_ADAPTATION_HPP
#define SHMPC_ADAPTATION_HPP

#include "shmpc/box.hpp"
#include "shmpc/common.hpp"
#include "shmpc/condensing.hpp"
#include "shmpc/dynamics.hpp"
#include "shmpc/pgm_solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace shmpc {

struct StageCostSum {
    double L = 0.0;
    Vector xi_N;
};

/// Sum of l(xi_i, mu_i) along xi_{i+1} = A xi_i + B mu_i from xi_k = x_k; terminal cost excluded.
inline StageCostSum stage_cost_sum(const LtiModel& model, const CostWeights& w, const Vector& x_k,
                                   const Vector& z_tail) {
    const Eigen::Index m = model.m();
    detail::require(x_k.size() == model.n() && z_tail.size() % m == 0, ErrorCategory::Dimension,
                    "stage_cost_sum: dimension mismatch");
    StageCostSum out;
    Vector xi = x_k;
    for (Eigen::Index i = 0; i < z_tail.size() / m; ++i) {
        const Vector mu = z_tail.segment(i * m, m);
        out.L += w.stage_cost(xi, mu);
        xi = model.step(xi, mu);
    }
    out.xi_N = std::move(xi);
    return out;
}

/// max(epsilon, (L - steps * gamma) / ((1 - rho) alpha))
inline double lambda_bound(double L, int steps, double gamma, double rho, double alpha, double epsilon) {
    detail::require(rho >= 0.0 && rho < 1.0, ErrorCategory::Domain, "rho must lie in [0, 1)");
    detail::require(alpha > 0.0 && gamma > 0.0 && epsilon > 0.0, ErrorCategory::Domain,
                    "alpha, gamma and epsilon must be positive");
    return std::max(epsilon, (L - steps * gamma) / ((1.0 - rho) * alpha));
}

/// F(xi_N)/alpha when xi_N is strictly inside the terminal set, nothing otherwise.
inline std::optional<double> rho_from_candidate(const Vector& xi_N, const Matrix& P, double alpha) {
    const double F = xi_N.dot(P * xi_N);
    if (F < alpha) {
        return F / alpha;
    }
    return std::nullopt;
}

struct ScheduleInputs {
    int k = 0;
    int N = 1;
    double beta_prime = 0.0;
    double gamma = 0.0;
    double alpha = 0.0;
    double omega = 1.0;
    /// lambda_max(W_{i+1}) for i = k..N-2, i.e. horizons N-k-1 down to 1.
    std::vector<double> w_lambda_max;
    double lambda_max_P = 0.0;
    double norm_B = 0.0;
    /// d_bar = disturbance_share * min_i wbar_i unless fixed_d_bar is given.
    double disturbance_share = 0.5;
    std::optional<double> fixed_d_bar;
};

/// Margin, sublevel, disturbance and solver-error schedules over i = k..N.
struct MarginSchedule {
    int k = 0;
    int N = 0;
    double omega = 0.0;
    std::vector<double> beta; ///< i = k..N
    std::vector<double> vbar; ///< i = k..N
    std::vector<double> wbar; ///< i = k..N-1
    std::vector<double> ebar; ///< i = k..N-1
    double d_bar = 0.0;

    [[nodiscard]] bool covers(int i) const noexcept { return i >= k && i <= N; }
    [[nodiscard]] double beta_at(int i) const { return beta.at(static_cast<std::size_t>(i - k)); }
    [[nodiscard]] double vbar_at(int i) const { return vbar.at(static_cast<std::size_t>(i - k)); }
    [[nodiscard]] double wbar_at(int i) const { return wbar.at(static_cast<std::size_t>(i - k)); }
    [[nodiscard]] double ebar_at(int i) const { return ebar.at(static_cast<std::size_t>(i - k)); }
};

/**
 * Vbar_i = (N-i) gamma + omega alpha - beta_i,
 * wbar_i = (Vbar_{i+1}^{1/2} - (Vbar_{i+1} - (beta_i - beta_{i+1}))^{1/2}) / pi_i,
 * ebar_i = (wbar_i - d_bar)/||B||, with pi_i = lambda_max^{1/2}(W_{i+1}) and
 * pi_{N-1} = (omega lambda_max(P))^{1/2}, for a given beta_k..beta_N.
 * in.beta_prime is ignored. Throws Infeasible when a premise fails.
 */
inline MarginSchedule schedules_from_beta(const std::vector<double>& beta, const ScheduleInputs& in) {
    const int k = in.k;
    const int N = in.N;
    detail::require(k >= 0 && k < N, ErrorCategory::Domain, "schedule start must satisfy 0 <= k < N");
    detail::require(in.omega > 0.0 && in.gamma > 0.0 && in.alpha > 0.0 && in.lambda_max_P > 0.0 && in.norm_B > 0.0,
                    ErrorCategory::Domain, "schedule inputs must be positive");
    detail::require(static_cast<int>(in.w_lambda_max.size()) == N - k - 1, ErrorCategory::Dimension,
                    "need lambda_max(W_{i+1}) for i = k..N-2");
    detail::require(static_cast<int>(beta.size()) == N - k + 1, ErrorCategory::Dimension,
                    "need beta_i for i = k..N");
    detail::require(beta.back() == 0.0, ErrorCategory::Domain, "beta_N must be zero");

    MarginSchedule s;
    s.k = k;
    s.N = N;
    s.omega = in.omega;
    s.beta = beta;
    s.vbar.resize(beta.size());
    for (int i = k; i <= N; ++i) {
        const double b = s.beta_at(i);
        s.vbar[static_cast<std::size_t>(i - k)] = (N - i) * in.gamma + in.omega * in.alpha - b;
        if (i < N) {
            const double upper = (N - i - 1) * in.gamma + in.omega * in.alpha;
            detail::require(b > 0.0 && b <= upper * (1.0 + 1e-12), ErrorCategory::Infeasible,
                            "beta schedule leaves its admissible range");
        }
    }

    s.wbar.resize(beta.size() - 1);
    for (int i = k; i < N; ++i) {
        const double pi = (i <= N - 2) ? std::sqrt(in.w_lambda_max[static_cast<std::size_t>(i - k)])
                                       : std::sqrt(in.omega * in.lambda_max_P);
        const double v_next = s.vbar_at(i + 1);
        const double radicand = v_next - (s.beta_at(i) - s.beta_at(i + 1));
        detail::require(v_next >= 0.0 && radicand >= 0.0, ErrorCategory::Infeasible,
                        "negative radicand in the disturbance bound; beta' too aggressive");
        s.wbar[static_cast<std::size_t>(i - k)] = (std::sqrt(v_next) - std::sqrt(radicand)) / pi;
    }

    const double w_min = *std::min_element(s.wbar.begin(), s.wbar.end());
    s.d_bar = in.fixed_d_bar ? *in.fixed_d_bar : in.disturbance_share * w_min;
    detail::require(s.d_bar >= 0.0 && s.d_bar <= w_min, ErrorCategory::Infeasible,
                    "disturbance bound exceeds the smallest admissible wbar");
    s.ebar.resize(s.wbar.size());
    for (std::size_t j = 0; j < s.wbar.size(); ++j) {
        s.ebar[j] = (s.wbar[j] - s.d_bar) / in.norm_B;
    }
    return s;
}

/// Linear margin decay beta_i = beta' (N-i)/(N-k) fed to schedules_from_beta.
inline MarginSchedule margin_schedules(const ScheduleInputs& in) {
    detail::require(in.k >= 0 && in.k < in.N, ErrorCategory::Domain, "schedule start must satisfy 0 <= k < N");
    detail::require(in.beta_prime > 0.0, ErrorCategory::Infeasible, "margin beta' must be positive");
    std::vector<double> beta(static_cast<std::size_t>(in.N - in.k + 1));
    for (int i = in.k; i <= in.N; ++i) {
        beta[static_cast<std::size_t>(i - in.k)] =
            in.beta_prime * static_cast<double>(in.N - i) / static_cast<double>(in.N - in.k);
    }
    return schedules_from_beta(beta, in);
}

struct AdaptOptions {
    double omega_prime_0 = 1.0;
    double epsilon = 1e-8;
    /// Position of the chosen weight inside [Lambda_k, omega_{k-1}]; 0 picks Lambda_k.
    double omega_fraction = 0.0;
    double disturbance_share = 0.5;
    /// Fixed-point tolerance of the initial high-accuracy solve.
    double initial_solve_tolerance = 1e-10;
    /// Disable all weight reductions (the adaptive run then reproduces the nominal one).
    bool freeze_weight = false;
    /// When the proposed weight fails the margin checks, bisect for the smallest one that passes.
    bool omega_search = false;
    /// Reductions smaller than this fraction of the current weight are not searched for.
    double min_relative_decrease = 0.05;
};

struct AdaptState {
    int k = 0;
    double omega = 1.0;
    double omega_prime_0 = 1.0;
    double epsilon = 1e-8;
    double beta_prime = 0.0;
    /// J~ - (N-k) gamma - omega~ alpha, the alternative margin arrangement; logged only.
    double beta_prime_alt = 0.0;
    double lambda_candidate = 0.0;
    std::optional<double> rho_tilde;
    int delta_k = 0;
    MarginSchedule schedule;

    [[nodiscard]] double d_bar() const noexcept { return schedule.d_bar; }
};

struct AdaptContext {
    const LtiModel* model = nullptr;
    const CostWeights* weights = nullptr;
    const BoxConstraint* U = nullptr;
    int N = 1;
    AdaptOptions options;
    CondensedQpCache* cache = nullptr;
};

struct OnlineStepResult {
    AdaptState state;
    Vector warm_start;  ///< zero on a cold start, otherwise the shifted previous solution
    bool cold_start = false;
    /// Exact solution of the k = 0 problem at omega'_0; set only by the initial step.
    std::optional<SolveResult> initial_solution;
};

namespace detail {

inline MarginSchedule schedule_from(const AdaptContext& ctx, int k, double omega, double beta_prime) {
    ScheduleInputs in;
    in.k = k;
    in.N = ctx.N;
    in.beta_prime = beta_prime;
    in.gamma = ctx.weights->gamma;
    in.alpha = ctx.weights->alpha;
    in.omega = omega;
    const int max_h = ctx.N - k - 1;
    if (max_h > 0) {
        const std::vector<double>& lm = ctx.cache->w_lambda_max(omega, max_h);
        // i = k..N-2 uses W_{i+1}, horizon N-i-1.
        for (int i = k; i <= ctx.N - 2; ++i) {
            in.w_lambda_max.push_back(lm[static_cast<std::size_t>(ctx.N - i - 1 - 1)]);
        }
    }
    in.lambda_max_P = lambda_max_sym(ctx.weights->P);
    in.norm_B = spectral_norm(ctx.model->B());
    in.disturbance_share = ctx.options.disturbance_share;
    return margin_schedules(in);
}

inline Vector shift_sequence(const Vector& z, Eigen::Index m) { return z.tail(z.size() - m); }

} // namespace detail

/**
 * One pass of the online terminal-weight adjustment.
 *
 * k = 0 solves the full problem at omega'_0, proposes omega~_0 from Lambda_0 and
 * accepts it when the margin is positive; otherwise omega_0 = omega'_0. For k > 0
 * the shifted previous solution is the candidate. Accepted reductions reset delta_k
 * and rebuild the schedules from k.
 */
inline OnlineStepResult online_step(const AdaptContext& ctx, int k, const AdaptState& previous, const Vector& x_k,
                                    const SolveResult* prev_solution) {
    detail::require(ctx.model && ctx.weights && ctx.U && ctx.cache, ErrorCategory::Domain, "incomplete context");
    detail::require(k >= 0 && k < ctx.N, ErrorCategory::Domain, "online_step: k outside [0, N-1]");
    const CostWeights& w = *ctx.weights;
    const Eigen::Index m = ctx.model->m();
    const int steps = ctx.N - k;
    const double alpha = w.alpha;
    const double gamma = w.gamma;

    OnlineStepResult out;
    AdaptState& st = out.state;

    auto try_candidate = [&](const Vector& candidate, double omega_ceiling) -> bool {
        const StageCostSum sum = stage_cost_sum(*ctx.model, w, x_k, candidate);
        st.rho_tilde = rho_from_candidate(sum.xi_N, w.P, alpha);
        if (!st.rho_tilde || ctx.options.freeze_weight) {
            return false;
        }
        const double lambda = lambda_bound(sum.L, steps, gamma, *st.rho_tilde, alpha, st.epsilon);
        st.lambda_candidate = lambda;
        if (!(lambda < omega_ceiling)) {
            return false;
        }
        struct Trial {
            double beta;
            double beta_alt;
            MarginSchedule schedule;
        };
        auto trial = [&](double omega_tilde) -> std::optional<Trial> {
            const CondensedQp& qp = ctx.cache->get(steps, omega_tilde);
            const double J_tilde = eval_cost(qp, x_k, candidate);
            const double first_stage = w.stage_cost(x_k, candidate.head(m));
            Trial t{first_stage + (steps - 1) * gamma + omega_tilde * alpha - J_tilde,
                    J_tilde - steps * gamma - omega_tilde * alpha, {}};
            if (!(t.beta > 0.0)) {
                return std::nullopt;
            }
            try {
                t.schedule = detail::schedule_from(ctx, k, omega_tilde, t.beta);
            } catch (const Error& e) {
                if (e.category() != ErrorCategory::Infeasible) {
                    throw;
                }
                return std::nullopt;
            }
            return t;
        };
        double omega_tilde = lambda + ctx.options.omega_fraction * (omega_ceiling - lambda);
        std::optional<Trial> accepted = trial(omega_tilde);
        if (!accepted && ctx.options.omega_search) {
            // Smallest admissible weight in [omega~, ceiling); the margin conditions tighten as omega shrinks.
            double lo = omega_tilde;
            double hi = omega_ceiling * (1.0 - ctx.options.min_relative_decrease);
            std::optional<Trial> best = hi > lo ? trial(hi) : std::nullopt;
            if (best) {
                for (int it = 0; it < 60 && hi - lo > 1e-6 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (auto t = trial(mid)) {
                        hi = mid;
                        best = std::move(t);
                    } else {
                        lo = mid;
                    }
                }
                omega_tilde = hi;
                accepted = std::move(best);
            }
        }
        if (!accepted) {
            return false;
        }
        const double beta = accepted->beta;
        st.beta_prime_alt = accepted->beta_alt;
        st.schedule = std::move(accepted->schedule);
        st.omega = omega_tilde;
        st.beta_prime = beta;
        st.delta_k = 0;
        return true;
    };

    if (k == 0) {
        st.k = 0;
        st.omega_prime_0 = ctx.options.omega_prime_0;
        st.epsilon = ctx.options.epsilon;
        st.omega = st.omega_prime_0;
        const CondensedQp& qp0 = ctx.cache->get(ctx.N, st.omega_prime_0);
        SolveResult exact = solve_to_tolerance(qp0, x_k, *ctx.U, ctx.options.initial_solve_tolerance);
        out.cold_start = true;
        out.warm_start = Vector::Zero(qp0.dim());
        if (!try_candidate(exact.z, st.omega_prime_0)) {
            const double beta = w.stage_cost(x_k, exact.z.head(m)) + (ctx.N - 1) * gamma +
                                st.omega_prime_0 * alpha - exact.cost;
            detail::require(beta > 0.0, ErrorCategory::Infeasible,
                            "no positive margin at omega'_0: the initial state is outside the reachable estimate");
            st.omega = st.omega_prime_0;
            st.beta_prime = beta;
            st.beta_prime_alt = exact.cost - ctx.N * gamma - st.omega_prime_0 * alpha;
            st.schedule = detail::schedule_from(ctx, 0, st.omega, beta);
        }
        st.delta_k = 0;
        out.initial_solution = std::move(exact);
        return out;
    }

    detail::require(prev_solution != nullptr, ErrorCategory::Domain, "online_step needs the previous solution");
    st = previous;
    st.k = k;
    st.rho_tilde.reset();
    const Vector candidate = detail::shift_sequence(prev_solution->z, m);
    if (try_candidate(candidate, previous.omega)) {
        out.cold_start = true;
        out.warm_start = Vector::Zero(candidate.size());
    } else {
        st.omega = previous.omega;
        st.beta_prime = previous.beta_prime;
        st.schedule = previous.schedule;
        st.delta_k = previous.delta_k + 1;
        out.cold_start = false;
        out.warm_start = candidate;
    }
    return out;
}

} // namespace shmpc

#endif // SHMPC_ADAPTATION_HPP
