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
#include "oracles.hpp"
#include "shmpc/shmpc.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace shmpc;

namespace {

struct Instance {
    LtiModel model;
    CostWeights w;
    BoxConstraint U;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, double box) {
    auto [A, B] = oracle::random_system(rng, n, m);
    LtiModel model(A, B);
    CostWeights w = make_cost_weights(model, oracle::random_spd(rng, n), oracle::random_spd(rng, m), 1.0);
    return {std::move(model), std::move(w), BoxConstraint::symmetric(m, box)};
}

Vector oracle_solution(const CondensedQp& qp, const Vector& x, const BoxConstraint& U) {
    const Vector lo = U.lower().replicate(qp.horizon(), 1);
    const Vector hi = U.upper().replicate(qp.horizon(), 1);
    return oracle::box_qp_coordinate_descent(qp.H(), qp.G() * x, lo, hi);
}

} // namespace

TEST(Box, Validation) {
    EXPECT_THROW(BoxConstraint((Vector(1) << 0.1).finished(), (Vector(1) << 1.0).finished()), Error);
    EXPECT_THROW(BoxConstraint((Vector(1) << -1.0).finished(), (Vector(1) << 0.0).finished()), Error);
    EXPECT_THROW(BoxConstraint((Vector(2) << -1.0, -1.0).finished(), (Vector(1) << 1.0).finished()), Error);
    EXPECT_NO_THROW(BoxConstraint::symmetric(2, 0.5));
}

TEST(ProjectBox, Examples) {
    const BoxConstraint U = BoxConstraint::symmetric(1, 0.5);
    const Vector z = (Vector(2) << 0.7, -0.9).finished();
    EXPECT_EQ(project_box(z, U), (Vector(2) << 0.5, -0.5).finished());
    const Vector inside = (Vector(2) << 0.2, -0.4).finished();
    EXPECT_EQ(project_box(inside, U), inside);
    EXPECT_TRUE(box_feasible(project_box(z, U), U));
    EXPECT_FALSE(box_feasible(z, U));
}

TEST(ProjectBox, Nonexpansive) {
    std::mt19937_64 rng(1);
    const BoxConstraint U((Vector(2) << -0.3, -1.0).finished(), (Vector(2) << 0.8, 0.2).finished());
    for (int trial = 0; trial < 1000; ++trial) {
        const Vector a = oracle::random_vector(rng, 8);
        const Vector b = oracle::random_vector(rng, 8);
        EXPECT_LE((project_box(a, U) - project_box(b, U)).norm(), (a - b).norm() + 1e-15);
        EXPECT_EQ(project_box(project_box(a, U), U), project_box(a, U));
    }
}

TEST(Pgm, OriginIsFixedPoint) {
    std::mt19937_64 rng(2);
    const Instance in = random_instance(rng, 2, 1, 0.5);
    const CondensedQp qp = condense(in.model, in.w, 1.0, 4);
    const SolveResult r = pgm_solve(qp, Vector::Zero(2), Vector::Zero(4), 50, in.U);
    EXPECT_EQ(r.z, Vector::Zero(4));
    EXPECT_EQ(r.iterations_run, 50);
}

TEST(Pgm, UnconstrainedLimitIsLinearSolve) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Instance in = random_instance(rng, 2, 1, 1e6);
        const CondensedQp qp = condense(in.model, in.w, 1.0, 3);
        const Vector x = oracle::random_vector(rng, 2);
        const Vector ref = -qp.H().ldlt().solve(qp.G() * x);
        const SolveResult r = solve_to_tolerance(qp, x, in.U, 1e-14);
        EXPECT_LE((r.z - ref).norm(), 1e-9 * std::max(1.0, ref.norm()));
        EXPECT_LE((qp.unconstrained_minimizer(x) - ref).norm(), 1e-12 * std::max(1.0, ref.norm()));
    }
}

TEST(Pgm, ActiveBoxMatchesGridSearch) {
    std::mt19937_64 rng(4);
    const Instance in = random_instance(rng, 1, 1, 0.2);
    const CondensedQp qp = condense(in.model, in.w, 1.0, 2);
    const Vector x = (Vector(1) << 5.0).finished();
    const SolveResult r = solve_to_tolerance(qp, x, in.U, 1e-14);

    const int pts = 2001;
    const double spacing = 0.4 / (pts - 1);
    double best = std::numeric_limits<double>::infinity();
    Vector zbest(2);
    Vector z(2);
    for (int i = 0; i < pts; ++i) {
        for (int j = 0; j < pts; ++j) {
            z << -0.2 + i * spacing, -0.2 + j * spacing;
            const double J = eval_cost(qp, x, z);
            if (J < best) {
                best = J;
                zbest = z;
            }
        }
    }
    EXPECT_LE((r.z - zbest).cwiseAbs().maxCoeff(), 2.0 * spacing);
    // Refinement: coordinate descent from the grid optimum.
    const Vector refined = oracle_solution(qp, x, in.U);
    EXPECT_LE(std::abs(r.cost - eval_cost(qp, x, refined)), 1e-6);
    EXPECT_LE(r.cost, best + 1e-12);
    const Vector lo = in.U.lower().replicate(2, 1);
    const Vector hi = in.U.upper().replicate(2, 1);
    EXPECT_LE(oracle::kkt_violation(qp.H(), qp.G() * x, lo, hi, r.z), 1e-8);
    // At least one coordinate is clamped, so this exercises the projection.
    EXPECT_GE((r.z.cwiseAbs().array() >= 0.2 - 1e-12).count(), 1);
}

TEST(Pgm, MatchesCoordinateDescentOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const Instance in = random_instance(rng, 3, 2, 0.3);
        const CondensedQp qp = condense(in.model, in.w, 0.5, 5);
        const Vector x = oracle::random_vector(rng, 3, 2.0);
        const Vector ref = oracle_solution(qp, x, in.U);
        const SolveResult r = solve_to_tolerance(qp, x, in.U, 1e-13);
        EXPECT_LE((r.z - ref).norm(), 1e-6);
        const Vector lo = in.U.lower().replicate(5, 1);
        const Vector hi = in.U.upper().replicate(5, 1);
        EXPECT_LE(oracle::kkt_violation(qp.H(), qp.G() * x, lo, hi, ref), 1e-10 * std::max(1.0, (qp.G() * x).norm()));
    }
}

TEST(Pgm, ContractionDescentAndFeasibility) {
    std::mt19937_64 rng(6);
    int h_norm_checks = 0;
    int h_norm_failures = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const Instance in = random_instance(rng, 2, 2, 0.4);
        const CondensedQp qp = condense(in.model, in.w, 1.0, 4);
        const Vector x = oracle::random_vector(rng, 2, 3.0);
        const Vector zs = oracle_solution(qp, x, in.U);
        const double rate = pgm_rate(qp);
        Vector z = Vector::Zero(qp.dim());
        double J = eval_cost(qp, x, z);
        for (int it = 0; it < 40; ++it) {
            const Vector next = pgm_solve(qp, x, z, 1, in.U).z;
            ASSERT_TRUE(box_feasible(next, in.U));
            EXPECT_LE((next - zs).norm(), rate * (z - zs).norm() + 1e-10);
            const double dH = std::sqrt((next - zs).dot(qp.H() * (next - zs)));
            const double dH0 = std::sqrt((z - zs).dot(qp.H() * (z - zs)));
            ++h_norm_checks;
            if (dH > rate * dH0 + 1e-10) {
                ++h_norm_failures;
            }
            const double Jn = eval_cost(qp, x, next);
            EXPECT_LE(Jn, J + 1e-12 * std::max(1.0, std::abs(J)));
            J = Jn;
            z = next;
        }
    }
    // The Euclidean projection is not an H-norm contraction in general; record how often it shows.
    RecordProperty("h_norm_contraction_failures", h_norm_failures);
    RecordProperty("h_norm_contraction_checks", h_norm_checks);
}

TEST(Pgm, RejectsInfeasibleStart) {
    std::mt19937_64 rng(7);
    const Instance in = random_instance(rng, 2, 1, 0.5);
    const CondensedQp qp = condense(in.model, in.w, 1.0, 3);
    try {
        (void)pgm_solve(qp, Vector::Zero(2), Vector::Constant(3, 1.0), 1, in.U);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Infeasible);
    }
}

TEST(IterBound, TrivialCases) {
    std::mt19937_64 rng(8);
    const Instance in = random_instance(rng, 2, 1, 0.5);
    const CondensedQp qp = condense(in.model, in.w, 1.0, 6);
    EXPECT_EQ(iter_bound_cold(qp, Vector::Zero(2), 1e-6), 0);
    const Vector x = oracle::random_vector(rng, 2);
    const double start = qp.inverse_norm(qp.G() * x) / std::sqrt(qp.lambda_min());
    EXPECT_EQ(iter_bound_cold(qp, x, start), 0);
    EXPECT_EQ(iter_bound_cold(qp, x, 2.0 * start), 0);
    EXPECT_GT(iter_bound_cold(qp, x, 1e-3 * start), 0);
    EXPECT_EQ(iter_bound_warm(qp, 1e-3, 0.0, 0.0), 0);
    EXPECT_EQ(iter_bound_warm(qp, (1.0 + qp.tau()) * 1e-3 + qp.sigma() * 1e-4, 1e-3, 1e-4), 0);
    EXPECT_GT(iter_bound_warm(qp, 1e-4, 1e-3, 1e-4), 0);
    EXPECT_THROW((void)iter_bound_cold(qp, x, 0.0), Error);
    EXPECT_THROW((void)iter_bound_warm(qp, 1e-3, -1.0, 0.0), Error);
}

TEST(IterBound, ClosedFormOnKnownRate) {
    // H = [[3,1],[1,2]]: kappa = (5+sqrt5)/(5-sqrt5), rate = sqrt5/5.
    const LtiModel model(Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0));
    CostWeights w;
    w.Q = w.R = w.P = Matrix::Constant(1, 1, 1.0);
    w.K = Matrix::Zero(1, 1);
    w.alpha = w.gamma = 1.0;
    const CondensedQp qp = condense(model, w, 1.0, 2);
    const double rate = std::sqrt(5.0) / 5.0;
    EXPECT_NEAR(pgm_rate(qp), rate, 1e-14);
    const double ratio = 1e-3;
    EXPECT_EQ(iter_bound_warm(qp, ratio, 1.0 / (1.0 + qp.tau()), 0.0),
              static_cast<int>(std::ceil(std::log(ratio) / std::log(rate))));
}

TEST(IterBound, ColdCertification) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> frac(1e-6, 0.5);
    for (int trial = 0; trial < 40; ++trial) {
        const Instance in = random_instance(rng, 3, 2, 0.3);
        const CondensedQp qp = condense(in.model, in.w, 0.7, 5);
        const Vector x = oracle::random_vector(rng, 3, 2.0);
        const double ebar = frac(rng) * qp.inverse_norm(qp.G() * x) / std::sqrt(qp.lambda_min());
        const int l = iter_bound_cold(qp, x, ebar);
        const SolveResult r = pgm_solve(qp, x, Vector::Zero(qp.dim()), l, in.U);
        EXPECT_LE((r.z - oracle_solution(qp, x, in.U)).norm(), ebar);
    }
}

TEST(IterBound, WarmCertificationOverShrinkingHorizon) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const Instance in = random_instance(rng, 3, 2, 0.3);
        const double omega = 0.9;
        const int h = 6;
        const CondensedQp qp = condense(in.model, in.w, omega, h);
        const CondensedQp next_qp = condense(in.model, in.w, omega, h - 1);
        const Vector x = oracle::random_vector(rng, 3, 2.0);
        const Vector zs = oracle_solution(qp, x, in.U);
        // Previous solve error at most ebar_prev.
        const double ebar_prev = 1e-2 * unit(rng);
        const Vector z_prev = project_box(zs + ebar_prev * oracle::random_vector(rng, qp.dim()).normalized(), in.U);
        ASSERT_LE((z_prev - zs).norm(), ebar_prev + 1e-15);
        const double d_bar = 1e-2 * unit(rng);
        const Vector d = d_bar * unit(rng) * oracle::random_vector(rng, 3).normalized();
        const Vector x_next = in.model.step(x, z_prev.head(2)) + d;
        const Vector warm = z_prev.tail(qp.dim() - 2);
        const double ebar = 1e-5 + 1e-3 * unit(rng);
        const int l = iter_bound_warm(next_qp, ebar, ebar_prev, d_bar);
        const SolveResult r = pgm_solve(next_qp, x_next, warm, l, in.U);
        EXPECT_LE((r.z - oracle_solution(next_qp, x_next, in.U)).norm(), ebar);
    }
}

TEST(Flops, Examples) {
    EXPECT_EQ(flops_per_iteration(1, 1, 1), 7);
    EXPECT_EQ(flops_per_iteration(200, 1, 2), 81400);
    EXPECT_EQ(flops_per_iteration(10, 2, 3), 980);
    static_assert(flops_per_iteration(1, 1, 1) == 7);
}

TEST(Regularity, LipschitzInequalities) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const Instance in = random_instance(rng, 3, 2, 0.3);
        const CondensedQp qp = condense(in.model, in.w, 0.8, 4);
        for (int s = 0; s < 50; ++s) {
            const Vector x = oracle::random_vector(rng, 3, 2.0);
            const Vector y = oracle::random_vector(rng, 3, 2.0);
            const Vector zx = oracle_solution(qp, x, in.U);
            const Vector zy = oracle_solution(qp, y, in.U);
            const Vector dz = zx - zy;
            const Vector Gd = qp.G() * (x - y);
            const double dzH2 = dz.dot(qp.H() * dz);
            EXPECT_LE(dz.dot(Gd), -dzH2 + 1e-8);
            EXPECT_LE(std::sqrt(dzH2), qp.inverse_norm(Gd) + 1e-8);
            const double psi_x = std::sqrt(std::max(0.0, eval_cost(qp, x, zx)));
            const double psi_y = std::sqrt(std::max(0.0, eval_cost(qp, y, zy)));
            EXPECT_LE(std::abs(psi_x - psi_y), std::sqrt((x - y).dot(qp.W() * (x - y))) + 1e-8);
        }
    }
}
