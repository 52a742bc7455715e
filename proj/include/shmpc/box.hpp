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
#ifndef SHMPC_BOX_HPP
#define SHMPC_BOX_HPP

#include "shmpc/common.hpp"

#include <algorithm>

namespace shmpc {

/// Input box U = {u : lower <= u <= upper}. The origin must be interior.
class BoxConstraint {
public:
    BoxConstraint(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
        detail::require(lower_.size() == upper_.size() && lower_.size() > 0, ErrorCategory::Dimension,
                        "box bounds must be non-empty and of equal length");
        detail::require(lower_.allFinite() && upper_.allFinite(), ErrorCategory::Domain,
                        "box bounds must be finite");
        detail::require((lower_.array() < 0.0).all() && (upper_.array() > 0.0).all(), ErrorCategory::Domain,
                        "box must contain the origin in its interior (lower < 0 < upper)");
    }

    static BoxConstraint symmetric(Eigen::Index m, double bound) {
        return {Vector::Constant(m, -bound), Vector::Constant(m, bound)};
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return lower_.size(); }
    [[nodiscard]] const Vector& lower() const noexcept { return lower_; }
    [[nodiscard]] const Vector& upper() const noexcept { return upper_; }

    [[nodiscard]] Vector clamp(const Vector& u) const { return u.cwiseMax(lower_).cwiseMin(upper_); }

    [[nodiscard]] bool contains(const Vector& u) const {
        return u.size() == dim() && (u.array() >= lower_.array()).all() && (u.array() <= upper_.array()).all();
    }

private:
    Vector lower_;
    Vector upper_;
};

/// Euclidean projection of a stacked input sequence onto U x U x ... x U.
inline Vector project_box(const Vector& z, const BoxConstraint& box) {
    const Eigen::Index m = box.dim();
    detail::require(z.size() % m == 0, ErrorCategory::Dimension, "stacked vector length is not a multiple of m");
    Vector out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const Eigen::Index j = i % m;
        out(i) = std::clamp(z(i), box.lower()(j), box.upper()(j));
    }
    return out;
}

inline bool box_feasible(const Vector& z, const BoxConstraint& box) {
    const Eigen::Index m = box.dim();
    if (z.size() % m != 0) {
        return false;
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const Eigen::Index j = i % m;
        if (!(z(i) >= box.lower()(j) && z(i) <= box.upper()(j))) {
            return false;
        }
    }
    return true;
}

} // namespace shmpc

#endif // SHMPC_BOX_HPP
