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
#ifndef SHMPC_CONDENSING_HPP
#define SHMPC_CONDENSING_HPP

#include "shmpc/common.hpp"
#include "shmpc/dynamics.hpp"

#include <map>
#include <memory>
#include <utility>
#include <vector>

namespace shmpc {

/// Stacked state powers and input-to-state blocks for a given horizon.
struct Prediction {
    Matrix Phi; ///< (h n) x n, row block i is A^{i+1}
    Matrix S;   ///< (h n) x (h m), row block l-1 is S_l = [A^{l-1}B, ..., B, 0, ..., 0]
    int horizon = 0;
    Eigen::Index n = 0;

    [[nodiscard]] Matrix S_block(int l) const { return S.middleRows((l - 1) * n, n); }
};

inline Prediction build_prediction(const LtiModel& model, int horizon) {
    detail::require(horizon >= 1, ErrorCategory::Domain, "horizon must be at least 1");
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();
    const Eigen::Index h = horizon;

    std::vector<Matrix> AkB(static_cast<std::size_t>(h));
    AkB[0] = model.B();
    for (Eigen::Index i = 1; i < h; ++i) {
        AkB[static_cast<std::size_t>(i)] = model.A() * AkB[static_cast<std::size_t>(i - 1)];
    }

    Prediction p;
    p.horizon = horizon;
    p.n = n;
    p.Phi.resize(h * n, n);
    p.S = Matrix::Zero(h * n, h * m);
    Matrix Ak = model.A();
    for (Eigen::Index l = 0; l < h; ++l) {
        p.Phi.middleRows(l * n, n) = Ak;
        Ak = model.A() * Ak;
        for (Eigen::Index j = 0; j <= l; ++j) {
            p.S.block(l * n, j * m, n, m) = AkB[static_cast<std::size_t>(l - j)];
        }
    }
    return p;
}

/**
 * @brief Condensed QP  J(x, z) = x'Wx + 2 z'Gx + z'Hz  for one horizon and terminal weight.
 *
 * H = S' Qbar S + Rbar, G = S' Qbar Phi, W = Q + Phi' Qbar Phi with
 * Qbar = blkdiag(Q, ..., Q, omega P) and Rbar = blkdiag(R, ..., R).
 * Immutable; carries the spectral data the solver and bounds need.
 */
class CondensedQp {
public:
    [[nodiscard]] int horizon() const noexcept { return horizon_; }
    [[nodiscard]] double omega() const noexcept { return omega_; }
    [[nodiscard]] Eigen::Index n() const noexcept { return W_.rows(); }
    [[nodiscard]] Eigen::Index m() const noexcept { return B_.cols(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return H_.rows(); }

    [[nodiscard]] const Matrix& H() const noexcept { return H_; }
    [[nodiscard]] const Matrix& G() const noexcept { return G_; }
    [[nodiscard]] const Matrix& W() const noexcept { return W_; }
    [[nodiscard]] const Matrix& S() const noexcept { return S_; }
    [[nodiscard]] const Matrix& Phi() const noexcept { return Phi_; }
    [[nodiscard]] const Matrix& B() const noexcept { return B_; }
    [[nodiscard]] const Matrix& P() const noexcept { return P_; }

    /// S_l, l in [1, horizon].
    [[nodiscard]] Matrix S_block(int l) const { return S_.middleRows((l - 1) * n(), n()); }

    [[nodiscard]] Matrix Qbar() const {
        const Eigen::Index nn = n();
        Matrix out = Matrix::Zero(horizon_ * nn, horizon_ * nn);
        for (int l = 0; l + 1 < horizon_; ++l) {
            out.block(l * nn, l * nn, nn, nn) = Q_;
        }
        out.bottomRightCorner(nn, nn) = omega_ * P_;
        return out;
    }

    [[nodiscard]] Matrix Rbar() const {
        const Eigen::Index mm = m();
        Matrix out = Matrix::Zero(horizon_ * mm, horizon_ * mm);
        for (int l = 0; l < horizon_; ++l) {
            out.block(l * mm, l * mm, mm, mm) = R_;
        }
        return out;
    }

    [[nodiscard]] double lambda_min() const noexcept { return eigenvalues_(0); }
    [[nodiscard]] double lambda_max() const noexcept { return eigenvalues_(eigenvalues_.size() - 1); }
    [[nodiscard]] double kappa() const noexcept { return lambda_max() / lambda_min(); }
    /// Ascending spectrum of H.
    [[nodiscard]] const Vector& eigenvalues() const noexcept { return eigenvalues_; }
    [[nodiscard]] const Vector& v_min() const noexcept { return v_min_; }
    [[nodiscard]] const Vector& v_max() const noexcept { return v_max_; }

    /// lambda_min^{-1/2}(H) * ||H^{-1/2} G B||
    [[nodiscard]] double tau() const noexcept { return tau_; }
    /// lambda_min^{-1/2}(H) * ||H^{-1/2} G||
    [[nodiscard]] double sigma() const noexcept { return sigma_; }

    /// H^{-1} v through the Cholesky factor.
    [[nodiscard]] Vector solve(const Vector& v) const { return llt_.solve(v); }

    /// ||v||_{H^{-1}}
    [[nodiscard]] double inverse_norm(const Vector& v) const { return std::sqrt(std::max(0.0, v.dot(solve(v)))); }

    /// Unconstrained minimizer -H^{-1} G x.
    [[nodiscard]] Vector unconstrained_minimizer(const Vector& x) const { return -solve(G_ * x); }

    [[nodiscard]] Vector gradient(const Vector& x, const Vector& z) const { return 2.0 * (H_ * z + G_ * x); }

private:
    friend CondensedQp condense_for_analysis(const LtiModel&, const CostWeights&, double, int);

    int horizon_ = 0;
    double omega_ = 0.0;
    Matrix H_, G_, W_, S_, Phi_, B_, Q_, P_, R_;
    Vector eigenvalues_, v_min_, v_max_;
    Eigen::LLT<Matrix> llt_;
    double tau_ = 0.0;
    double sigma_ = 0.0;
};

/// Same as condense() but admits omega = 0 (the terminal block dropped) for analysis.
inline CondensedQp condense_for_analysis(const LtiModel& model, const CostWeights& w, double omega, int horizon) {
    detail::require(omega >= 0.0 && std::isfinite(omega), ErrorCategory::Domain, "omega must be non-negative");
    detail::require(w.Q.rows() == model.n() && w.P.rows() == model.n() && w.R.rows() == model.m(),
                    ErrorCategory::Dimension, "weights do not match the model");
    const Prediction pred = build_prediction(model, horizon);
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();
    const Eigen::Index h = horizon;

    CondensedQp qp;
    qp.horizon_ = horizon;
    qp.omega_ = omega;
    qp.B_ = model.B();
    qp.Q_ = w.Q;
    qp.P_ = w.P;
    qp.R_ = w.R;

    // Qbar applied blockwise.
    Matrix QS(h * n, h * m);
    Matrix QPhi(h * n, n);
    for (Eigen::Index l = 0; l < h; ++l) {
        const Matrix& Wl = (l + 1 < h) ? w.Q : static_cast<const Matrix&>(w.P);
        const double s = (l + 1 < h) ? 1.0 : omega;
        QS.middleRows(l * n, n).noalias() = s * Wl * pred.S.middleRows(l * n, n);
        QPhi.middleRows(l * n, n).noalias() = s * Wl * pred.Phi.middleRows(l * n, n);
    }
    qp.H_.noalias() = pred.S.transpose() * QS;
    for (Eigen::Index l = 0; l < h; ++l) {
        qp.H_.block(l * m, l * m, m, m) += w.R;
    }
    qp.H_ = 0.5 * (qp.H_ + qp.H_.transpose()).eval();
    qp.G_.noalias() = QS.transpose() * pred.Phi;
    qp.W_ = w.Q;
    qp.W_.noalias() += pred.Phi.transpose() * QPhi;
    qp.W_ = 0.5 * (qp.W_ + qp.W_.transpose()).eval();
    qp.S_ = pred.S;
    qp.Phi_ = pred.Phi;

    qp.llt_.compute(qp.H_);
    detail::require(qp.llt_.info() == Eigen::Success, ErrorCategory::NotPositiveDefinite,
                    "condensed Hessian is not positive definite");
    Eigen::SelfAdjointEigenSolver<Matrix> es(qp.H_);
    detail::require(es.info() == Eigen::Success, ErrorCategory::Convergence, "Hessian eigensolve failed");
    qp.eigenvalues_ = es.eigenvalues();
    qp.v_min_ = es.eigenvectors().col(0);
    qp.v_max_ = es.eigenvectors().col(es.eigenvectors().cols() - 1);

    // ||H^{-1/2} M||^2 = lambda_max(M' H^{-1} M)
    const Matrix GB = qp.G_ * qp.B_;
    const double inv_sqrt_lmin = 1.0 / std::sqrt(qp.lambda_min());
    qp.tau_ = inv_sqrt_lmin * std::sqrt(std::max(0.0, detail::lambda_max_sym(GB.transpose() * qp.llt_.solve(GB))));
    qp.sigma_ =
        inv_sqrt_lmin * std::sqrt(std::max(0.0, detail::lambda_max_sym(qp.G_.transpose() * qp.llt_.solve(qp.G_))));
    return qp;
}

inline CondensedQp condense(const LtiModel& model, const CostWeights& w, double omega, int horizon) {
    detail::require(omega > 0.0, ErrorCategory::Domain, "terminal weight omega must be positive");
    return condense_for_analysis(model, w, omega, horizon);
}

/// x'Wx + 2 z'Gx + z'Hz
inline double eval_cost(const CondensedQp& qp, const Vector& x, const Vector& z) {
    detail::require(x.size() == qp.n() && z.size() == qp.dim(), ErrorCategory::Dimension,
                    "eval_cost: dimension mismatch");
    return x.dot(qp.W() * x) + 2.0 * z.dot(qp.G() * x) + z.dot(qp.H() * z);
}

struct SpectralData {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double kappa = 1.0;
    Vector v_min;
    Vector v_max;
};

inline SpectralData spectral(const CondensedQp& qp) {
    return {qp.lambda_min(), qp.lambda_max(), qp.kappa(), qp.v_min(), qp.v_max()};
}


/**
 * W_h(omega) = sum_{l=0}^{h-1} (A^l)' Q A^l + omega (A^h)' P A^h for h = 1..max_horizon,
 * the parameter block of the condensed cost without building H.
 */
inline std::vector<Matrix> parameter_weights(const LtiModel& model, const CostWeights& w, double omega,
                                             int max_horizon) {
    detail::require(max_horizon >= 0, ErrorCategory::Domain, "max_horizon must be non-negative");
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(max_horizon));
    Matrix stage_sum = w.Q;
    Matrix Ak = model.A();
    for (int h = 1; h <= max_horizon; ++h) {
        Matrix Wh = stage_sum + omega * Ak.transpose() * w.P * Ak;
        out.push_back(0.5 * (Wh + Wh.transpose()));
        stage_sum += Ak.transpose() * w.Q * Ak;
        Ak = model.A() * Ak;
    }
    return out;
}

/// Memoizes condensed QPs by (horizon, omega). Not thread-safe; one cache per worker.
class CondensedQpCache {
public:
    CondensedQpCache(LtiModel model, CostWeights weights) : model_(std::move(model)), weights_(std::move(weights)) {}

    const CondensedQp& get(int horizon, double omega) {
        const auto key = std::make_pair(horizon, omega);
        auto it = qps_.find(key);
        if (it == qps_.end()) {
            it = qps_.emplace(key, std::make_unique<CondensedQp>(condense(model_, weights_, omega, horizon))).first;
        }
        return *it->second;
    }

    /// lambda_max(W_h(omega)) for h = 1..max_horizon.
    const std::vector<double>& w_lambda_max(double omega, int max_horizon) {
        auto it = w_lmax_.find(omega);
        if (it == w_lmax_.end() || static_cast<int>(it->second.size()) < max_horizon) {
            std::vector<double> vals;
            for (const Matrix& Wh : parameter_weights(model_, weights_, omega, max_horizon)) {
                vals.push_back(detail::lambda_max_sym(Wh));
            }
            it = w_lmax_.insert_or_assign(omega, std::move(vals)).first;
        }
        return it->second;
    }

    [[nodiscard]] const LtiModel& model() const noexcept { return model_; }
    [[nodiscard]] const CostWeights& weights() const noexcept { return weights_; }
    [[nodiscard]] std::size_t size() const noexcept { return qps_.size(); }

private:
    LtiModel model_;
    CostWeights weights_;
    std::map<std::pair<int, double>, std::unique_ptr<CondensedQp>> qps_;
    std::map<double, std::vector<double>> w_lmax_;
};

} // namespace shmpc

#endif // SHMPC_CONDENSING_HPP
