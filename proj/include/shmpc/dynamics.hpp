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
#ifndef SHMPC_DYNAMICS_HPP
#define SHMPC_DYNAMICS_HPP

#include "shmpc/box.hpp"
#include "shmpc/common.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>

namespace shmpc {

/**
 * @brief Discrete-time LTI model x+ = A x + B u (+ d).
 *
 * Construction validates dimensions and a PBH stabilizability test.
 */
class LtiModel {
public:
    LtiModel(Matrix A, Matrix B);

    [[nodiscard]] const Matrix& A() const noexcept { return A_; }
    [[nodiscard]] const Matrix& B() const noexcept { return B_; }
    [[nodiscard]] Eigen::Index n() const noexcept { return A_.rows(); }
    [[nodiscard]] Eigen::Index m() const noexcept { return B_.cols(); }

    [[nodiscard]] Vector step(const Vector& x, const Vector& u) const { return A_ * x + B_ * u; }

private:
    Matrix A_;
    Matrix B_;
};

// PBH test: rank [lambda I - A, B] = n at every eigenvalue with |lambda| >= 1 - 1e-9.
inline bool is_stabilizable(const Matrix& A, const Matrix& B) {
    const Eigen::Index n = A.rows();
    Eigen::EigenSolver<Matrix> es(A, false);
    if (es.info() != Eigen::Success) {
        return false;
    }
    Matrix AB(n, n + B.cols());
    AB << A, B;
    const double scale = std::max(1.0, detail::spectral_norm(AB));
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::complex<double> lambda = es.eigenvalues()(i);
        if (std::abs(lambda) < 1.0 - 1e-9) {
            continue;
        }
        Eigen::MatrixXcd pbh(n, n + B.cols());
        pbh.leftCols(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
        pbh.rightCols(B.cols()) = B.cast<std::complex<double>>();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
        const auto& sv = svd.singularValues();
        Eigen::Index rank = 0;
        for (Eigen::Index j = 0; j < sv.size(); ++j) {
            if (sv(j) > 1e-10 * scale) {
                ++rank;
            }
        }
        if (rank < n) {
            return false;
        }
    }
    return true;
}

inline LtiModel::LtiModel(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    detail::require(A_.rows() >= 1 && A_.rows() == A_.cols(), ErrorCategory::Dimension, "A must be square, n >= 1");
    detail::require(B_.rows() == A_.rows() && B_.cols() >= 1, ErrorCategory::Dimension, "B must be n x m, m >= 1");
    detail::require(A_.allFinite() && B_.allFinite(), ErrorCategory::Domain, "model matrices must be finite");
    detail::require(is_stabilizable(A_, B_), ErrorCategory::NotStabilizable, "(A, B) is not stabilizable");
}

/// exp(M) by scaling and squaring a truncated Taylor series.
inline Matrix matrix_exponential(const Matrix& M) {
    detail::require(M.rows() == M.cols(), ErrorCategory::Dimension, "matrix exponential needs a square matrix");
    detail::require(M.allFinite(), ErrorCategory::Domain, "matrix exponential of non-finite matrix");
    const double norm = M.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    const Matrix X = M / std::ldexp(1.0, squarings);
    const Eigen::Index n = M.rows();
    Matrix result = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    // ||X|| <= 0.5: the remainder after term k is bounded by 2 * ||term_k||.
    for (int k = 1; k < 60; ++k) {
        term = term * X / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().colwise().sum().maxCoeff() < 1e-18) {
            break;
        }
    }
    for (int i = 0; i < squarings; ++i) {
        result = result * result;
    }
    return result;
}

enum class Discretization { ZeroOrderHold, ForwardEuler };

struct DiscreteMatrices {
    Matrix A;
    Matrix B;
};

namespace detail {

inline void check_continuous(const Matrix& A_cont, const Matrix& B_cont, double Ts) {
    require(Ts > 0.0 && std::isfinite(Ts), ErrorCategory::Domain, "sampling period must be positive");
    require(A_cont.rows() == A_cont.cols() && B_cont.rows() == A_cont.rows() && B_cont.cols() >= 1,
            ErrorCategory::Dimension, "continuous-time matrices are dimensionally inconsistent");
    require(A_cont.allFinite() && B_cont.allFinite(), ErrorCategory::Domain, "non-finite model entries");
}

} // namespace detail

/// Exact zero-order-hold discretization via the augmented matrix exponential. No stabilizability check.
inline DiscreteMatrices zoh_matrices(const Matrix& A_cont, const Matrix& B_cont, double Ts) {
    detail::check_continuous(A_cont, B_cont, Ts);
    const Eigen::Index n = A_cont.rows();
    const Eigen::Index m = B_cont.cols();
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = A_cont * Ts;
    aug.topRightCorner(n, m) = B_cont * Ts;
    const Matrix E = matrix_exponential(aug);
    return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

inline DiscreteMatrices euler_matrices(const Matrix& A_cont, const Matrix& B_cont, double Ts) {
    detail::check_continuous(A_cont, B_cont, Ts);
    const Eigen::Index n = A_cont.rows();
    return {Matrix::Identity(n, n) + Ts * A_cont, Ts * B_cont};
}

inline DiscreteMatrices discretize_matrices(const Matrix& A_cont, const Matrix& B_cont, double Ts,
                                            Discretization method) {
    return method == Discretization::ZeroOrderHold ? zoh_matrices(A_cont, B_cont, Ts)
                                                   : euler_matrices(A_cont, B_cont, Ts);
}

inline LtiModel discretize_zoh(const Matrix& A_cont, const Matrix& B_cont, double Ts) {
    DiscreteMatrices d = zoh_matrices(A_cont, B_cont, Ts);
    return {std::move(d.A), std::move(d.B)};
}

inline LtiModel discretize_euler(const Matrix& A_cont, const Matrix& B_cont, double Ts) {
    DiscreteMatrices d = euler_matrices(A_cont, B_cont, Ts);
    return {std::move(d.A), std::move(d.B)};
}

inline LtiModel discretize(const Matrix& A_cont, const Matrix& B_cont, double Ts, Discretization method) {
    DiscreteMatrices d = discretize_matrices(A_cont, B_cont, Ts, method);
    return {std::move(d.A), std::move(d.B)};
}

struct DareSolution {
    Matrix P;
    Matrix K;
    int iterations = 0;
    double residual = 0.0;
};

/// || Q + A'PA - (A'PB) K - P ||_F with K = (R + B'PB)^{-1} B'PA.
inline double dare_residual(const LtiModel& model, const Matrix& Q, const Matrix& R, const Matrix& P) {
    const Matrix& A = model.A();
    const Matrix& B = model.B();
    const Matrix K = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    return (Q + A.transpose() * P * A - (A.transpose() * P * B) * K - P).norm();
}

/// Riccati recursion from P = Q until successive iterates agree to 1e-12.
inline DareSolution solve_dare(const LtiModel& model, const Matrix& Q, const Matrix& R, int max_iterations = 1'000'000) {
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();
    detail::require(Q.rows() == n && Q.cols() == n, ErrorCategory::Dimension, "Q must be n x n");
    detail::require(R.rows() == m && R.cols() == m, ErrorCategory::Dimension, "R must be m x m");
    detail::require(detail::is_positive_definite(Q), ErrorCategory::NotPositiveDefinite, "Q must be positive definite");
    detail::require(detail::is_positive_definite(R), ErrorCategory::NotPositiveDefinite, "R must be positive definite");

    const Matrix& A = model.A();
    const Matrix& B = model.B();
    const Matrix At = A.transpose();
    const Matrix Bt = B.transpose();
    Matrix P = Q;
    double prev_change = std::numeric_limits<double>::infinity();
    // Near the fixed point the iterates wander at rounding level; keep the one with the smallest residual.
    std::optional<Matrix> best;
    double best_residual = std::numeric_limits<double>::infinity();
    int stalled = 0;
    int it = 0;
    for (; it < max_iterations; ++it) {
        const Matrix BtPA = Bt * P * A;
        const Matrix K = (R + Bt * P * B).ldlt().solve(BtPA);
        Matrix next = Q + At * P * A - BtPA.transpose() * K;
        next = 0.5 * (next + next.transpose()).eval();
        const double change = (next - P).norm();
        P = std::move(next);
        if (!P.allFinite()) {
            break;
        }
        const double scale = std::max(1.0, P.norm());
        if (change <= 1e-15 * scale) {
            ++it;
            best.reset();
            break;
        }
        if (change <= 1e-13 * scale || (change <= 1e-10 * scale && change >= prev_change)) {
            const double r = dare_residual(model, Q, R, P);
            if (r < best_residual) {
                best_residual = r;
                best = P;
            }
            if (++stalled >= 200) {
                ++it;
                break;
            }
        }
        prev_change = change;
    }
    detail::require(P.allFinite() && it < max_iterations, ErrorCategory::Convergence,
                    "Riccati iteration did not converge");
    if (best) {
        P = std::move(*best);
    }
    DareSolution sol;
    sol.K = (R + Bt * P * B).ldlt().solve(Bt * P * A);
    sol.P = std::move(P);
    sol.iterations = it;
    sol.residual = dare_residual(model, Q, R, sol.P);
    detail::require(sol.residual <= 1e-9, ErrorCategory::Convergence, "DARE residual above 1e-9");
    return sol;
}

/// alpha * lambda_min(P^{-1/2} Q P^{-1/2}), via the generalized problem Q v = lambda P v.
inline double gamma_level(double alpha, const Matrix& Q, const Matrix& P) {
    detail::require(alpha > 0.0, ErrorCategory::Domain, "alpha must be positive");
    detail::require(Q.rows() == P.rows() && Q.cols() == P.cols(), ErrorCategory::Dimension, "Q and P sizes differ");
    detail::require(detail::is_positive_definite(Q), ErrorCategory::NotPositiveDefinite, "Q must be positive definite");
    detail::require(detail::is_positive_definite(P), ErrorCategory::NotPositiveDefinite, "P must be positive definite");
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(Q, P, Eigen::EigenvaluesOnly);
    return alpha * ges.eigenvalues().minCoeff();
}

/// Q, R, the DARE pair (P, K), terminal level alpha and gamma = alpha * lambda_min^P(Q).
struct CostWeights {
    Matrix Q;
    Matrix R;
    Matrix P;
    Matrix K;
    double alpha = 0.0;
    double gamma = 0.0;

    /// chi when R = chi * I, nothing otherwise.
    [[nodiscard]] std::optional<double> chi() const {
        const double c = R(0, 0);
        const Matrix diff = R - c * Matrix::Identity(R.rows(), R.cols());
        if (c > 0.0 && diff.cwiseAbs().maxCoeff() <= 1e-14 * c) {
            return c;
        }
        return std::nullopt;
    }

    [[nodiscard]] double stage_cost(const Vector& x, const Vector& u) const {
        return x.dot(Q * x) + u.dot(R * u);
    }

    [[nodiscard]] double terminal_cost(const Vector& x) const { return x.dot(P * x); }
};

inline CostWeights make_cost_weights(const LtiModel& model, const Matrix& Q, const Matrix& R, double alpha) {
    detail::require(alpha > 0.0 && std::isfinite(alpha), ErrorCategory::Domain, "alpha must be positive");
    detail::require((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, Q.norm()),
                    ErrorCategory::Domain, "Q must be symmetric");
    DareSolution dare = solve_dare(model, Q, R);
    CostWeights w;
    w.Q = Q;
    w.R = R;
    w.P = std::move(dare.P);
    w.K = std::move(dare.K);
    w.alpha = alpha;
    w.gamma = gamma_level(alpha, Q, w.P);
    return w;
}

/// Omega = {F(x) <= alpha} with F(x) = x'Px, plus its tightened version Omega_rho.
struct TerminalSet {
    Matrix P;
    double alpha = 0.0;
    double rho_tight = 0.5;

    [[nodiscard]] double F(const Vector& x) const { return x.dot(P * x); }
    [[nodiscard]] bool contains(const Vector& x) const { return F(x) <= alpha; }
    [[nodiscard]] bool contains_tightened(const Vector& x) const { return F(x) <= rho_tight * alpha; }
    [[nodiscard]] bool in_interior(const Vector& x) const { return F(x) < alpha; }
};

struct InvarianceReport {
    std::size_t samples = 0;
    double max_violation = 0.0;
    Vector worst_state;
    bool passed = false;
};

/**
 * Samples the boundary F(x) = alpha and evaluates F(Ax+Bu) - F(x) + l(x,u)
 * at the saturated LQ control u = clamp(-Kx). For m = 1 this is the exact
 * minimizer over U; for m > 1 it is an upper bound on the minimum.
 */
inline InvarianceReport check_terminal_invariance(const LtiModel& model, const CostWeights& w,
                                                  const BoxConstraint& U, std::size_t n_samples,
                                                  std::uint64_t seed) {
    detail::require(U.dim() == model.m(), ErrorCategory::Dimension, "box dimension must equal m");
    const Eigen::Index n = model.n();
    Eigen::SelfAdjointEigenSolver<Matrix> es(w.P);
    const Matrix P_inv_sqrt = es.operatorInverseSqrt();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    InvarianceReport report;
    report.samples = n_samples;
    report.max_violation = -std::numeric_limits<double>::infinity();
    report.worst_state = Vector::Zero(n);
    Vector dir(n);
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (Eigen::Index i = 0; i < n; ++i) {
            dir(i) = normal(rng);
        }
        if (dir.norm() == 0.0) {
            continue;
        }
        const Vector x = std::sqrt(w.alpha) * P_inv_sqrt * dir.normalized();
        const Vector u = U.clamp(-w.K * x);
        const double v = w.terminal_cost(model.step(x, u)) - w.terminal_cost(x) + w.stage_cost(x, u);
        if (v > report.max_violation) {
            report.max_violation = v;
            report.worst_state = x;
        }
    }
    if (n_samples == 0) {
        report.max_violation = 0.0;
    }
    report.passed = report.max_violation <= 1e-8;
    return report;
}

inline double spectral_radius(const Matrix& M) {
    Eigen::EigenSolver<Matrix> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace shmpc

#endif // SHMPC_DYNAMICS_HPP
