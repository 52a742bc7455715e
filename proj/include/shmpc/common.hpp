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
#ifndef SHMPC_COMMON_HPP
#define SHMPC_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace shmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Coarse failure classes; the CLI maps each to a distinct exit code.
enum class ErrorCategory {
    Dimension,
    NotPositiveDefinite,
    NotStabilizable,
    Convergence,
    Infeasible,
    Config,
    Io,
    Domain,
};

inline std::string_view to_string(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Dimension: return "dimension";
    case ErrorCategory::NotPositiveDefinite: return "not_positive_definite";
    case ErrorCategory::NotStabilizable: return "not_stabilizable";
    case ErrorCategory::Convergence: return "convergence";
    case ErrorCategory::Infeasible: return "infeasible";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Domain: return "domain";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

namespace detail {

inline void require(bool ok, ErrorCategory c, const std::string& msg) {
    if (!ok) {
        throw Error(c, msg);
    }
}

inline bool all_finite(const Matrix& M) { return M.allFinite(); }

inline bool is_positive_definite(const Matrix& M) {
    if (M.rows() != M.cols() || M.rows() == 0) {
        return false;
    }
    Eigen::LLT<Matrix> llt(M);
    return llt.info() == Eigen::Success;
}

/// Largest eigenvalue of a symmetric matrix.
inline double lambda_max_sym(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline double lambda_min_sym(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Spectral norm (largest singular value).
inline double spectral_norm(const Matrix& M) {
    if (M.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

} // namespace detail
} // namespace shmpc

#endif // SHMPC_COMMON_HPP
