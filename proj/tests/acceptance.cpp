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
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "oracles.hpp"
#include "shmpc/shmpc.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace shmpc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %2d %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++failures;
    }
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

struct Instance {
    LtiModel model;
    CostWeights w;
    BoxConstraint U;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, bool scalar_r,
                         double input_scale = 1.0) {
    auto [A, B] = oracle::random_system(rng, n, m);
    LtiModel model(A, B * input_scale);
    std::uniform_real_distribution<double> chi(0.2, 5.0);
    const Matrix R = scalar_r ? Matrix(chi(rng) * Matrix::Identity(m, m)) : oracle::random_spd(rng, m);
    const Matrix Q = oracle::random_spd(rng, n);
    CostWeights w = make_cost_weights(model, Q, R, 1.0);
    std::uniform_real_distribution<double> box(0.1, 1.0);
    const double b = box(rng);
    return {std::move(model), std::move(w), BoxConstraint::symmetric(m, b)};
}

Vector oracle_solution(const CondensedQp& qp, const Vector& x, const BoxConstraint& U) {
    const Vector lo = U.lower().replicate(qp.horizon(), 1);
    const Vector hi = U.upper().replicate(qp.horizon(), 1);
    return oracle::box_qp_coordinate_descent(qp.H(), qp.G() * x, lo, hi);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Benchmark runs shared by criteria 1 and 8.
struct Benchmark {
    std::vector<SimLog> runs;
    double seconds = 0.0;
};

Benchmark benchmark_runs() {
    const auto t0 = Clock::now();
    SimConfig cfg = spacecraft_preset();
    cfg.disturbance.scale = 1.0;
    const LtiModel model = cfg.build_model();
    CondensedQpCache cache(model, make_cost_weights(model, cfg.Q, cfg.R, cfg.alpha));
    Benchmark b;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        cfg.disturbance.seed = seed;
        for (ControlMode mode : {ControlMode::Nominal, ControlMode::Adaptive}) {
            cfg.mode = mode;
            b.runs.push_back(run_closed_loop(cfg, &cache));
        }
    }
    b.seconds = seconds_since(t0);
    return b;
}

void criterion1(const Benchmark& b) {
    constexpr double alpha = 13.2667;
    double worst = 0.0;
    bool ok = true;
    for (const SimLog& log : b.runs) {
        worst = std::max(worst, log.terminal_F);
        ok = ok && log.success && log.terminal_F <= alpha;
    }
    ok = ok && b.seconds < 120.0;
    report(1, ok, "runs=" + std::to_string(b.runs.size()) + fmt(" max_F=%.6g", worst) + fmt(" alpha=%.6g", alpha) +
                      fmt(" seconds=%.1f", b.seconds));
}

void criterion2(const ModeComparison& cmp, const SimConfig& cfg) {
    const LtiModel model = cfg.build_model();
    const CostWeights w = make_cost_weights(model, cfg.Q, cfg.R, cfg.alpha);
    const RatioConditionReport ratio = ratio_condition_check(model, w, cfg.N, cfg.omega_prime_0);
    int reduced = 0;
    for (const StepRecord& s : cmp.adaptive.steps) {
        reduced += s.omega < cfg.omega_prime_0 ? 1 : 0;
    }
    report(2, cmp.kappa_dominance && ratio.holds,
           "reduced_steps=" + std::to_string(reduced) + " first_violation=" + std::to_string(cmp.first_violation) +
               fmt(" ratio_lhs=%.6g", ratio.lhs) + fmt(" ratio_rhs=%.6g", ratio.rhs) + (ratio.holds ? " ratio_condition=holds" : " ratio_condition=fails"));
}

void criterion3(const ModeComparison& cmp) {
    constexpr double nominal_target = 2.19e7;
    constexpr double adaptive_target = 1.24e7;
    constexpr double rel = 0.30;
    const auto fn = static_cast<double>(cmp.nominal.flops_total);
    const auto fa = static_cast<double>(cmp.adaptive.flops_total);
    const bool ok = fa < fn && within(fn, nominal_target, rel) && within(fa, adaptive_target, rel);
    report(3, ok, fmt("nominal=%.4g", fn) + fmt(" (target %.3g)", nominal_target) + fmt(" adaptive=%.4g", fa) +
                      fmt(" (target %.3g)", adaptive_target) + fmt(" ratio=%.3f", fa / fn));
}

void criterion4(const ModeComparison& cmp) {
    constexpr double rel = 0.10;
    constexpr double nominal_target = 1.58e-4;
    const std::vector<double> adaptive_targets{1.58e-4, 1.31e-4, 1.31e-4, 1.36e-4};
    const double dn = cmp.nominal.steps.front().d_bar;
    bool ok = within(dn, nominal_target, rel);
    std::vector<double> seq;
    for (const StepRecord& s : cmp.adaptive.steps) {
        if (s.cold_start) {
            seq.push_back(s.d_bar);
        }
    }
    ok = ok && seq.size() == adaptive_targets.size();
    std::string detail = fmt("nominal_dbar=%.4g", dn) + " adaptive_dbar=[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
        detail += (i ? "," : "") + fmt("%.4g", seq[i]);
        if (i < adaptive_targets.size()) {
            ok = ok && within(seq[i], adaptive_targets[i], rel);
        }
    }
    detail += "] cold_starts=" + std::to_string(seq.size()) + " (target 4)";
    report(4, ok, detail);
}

void criterion5() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2026);
    std::uniform_int_distribution<int> dn(1, 4);
    std::uniform_int_distribution<int> dm(1, 2);
    std::uniform_int_distribution<int> dh(1, 12);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    std::uniform_real_distribution<double> decade(-2.5, 0.0);
    bool spectrum = true;
    bool kappa = true;
    bool deriv = true;
    int ratio_instances = 0;
    int skipped = 0;
    int redrawn = 0;
    double worst_rel = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = dn(rng);
        const int m = dm(rng);
        // Input matrices over two and a half decades so the ratio condition is met on part of the set.
        // Draws whose Riccati solve misses its residual gate are redrawn.
        std::optional<Instance> drawn;
        while (!drawn) {
            try {
                drawn.emplace(random_instance(rng, n, m, true, std::pow(10.0, decade(rng))));
            } catch (const Error& e) {
                if (e.category() != ErrorCategory::Convergence) {
                    throw;
                }
                ++redrawn;
            }
        }
        const Instance& in = *drawn;
        const int h = dh(rng);
        const double w1 = u(rng);
        const double w2 = w1 + u(rng);
        const SweepReport r = kappa_sweep(in.model, in.w, h, {w1, w2});
        spectrum = spectrum && r.spectrum_monotone;
        // Elementwise check against the independent eigen-solver as well.
        const oracle::Eig e1 = oracle::jacobi_eigen(condense(in.model, in.w, w1, h).H());
        const oracle::Eig e2 = oracle::jacobi_eigen(condense(in.model, in.w, w2, h).H());
        for (Eigen::Index l = 0; l < e1.values.size(); ++l) {
            spectrum = spectrum && e2.values(l) >= e1.values(l) - 1e-10 * e2.values.maxCoeff();
        }
        if (r.ratio_condition_ok) {
            ++ratio_instances;
            kappa = kappa && r.kappa_monotone;
        }
        for (double omega : {w1, w2}) {
            const DerivativeCheck d = eigen_derivative_check(in.model, in.w, h, omega, 1e-4);
            if (d.skipped) {
                ++skipped;
                continue;
            }
            deriv = deriv && d.passed;
            worst_rel = std::max({worst_rel, d.rel_err_min, d.rel_err_max});
        }
    }
    const double secs = seconds_since(t0);
    report(5, spectrum && kappa && ratio_instances > 0 && deriv && secs < 60.0,
           std::string("spectrum_monotone=") + (spectrum ? "yes" : "no") + " kappa_monotone_where_ratio_holds=" +
               (kappa ? "yes" : "no") + " ratio_instances=" + std::to_string(ratio_instances) +
               fmt(" derivative_worst_rel=%.3g", worst_rel) + " derivative_skipped=" + std::to_string(skipped) + " redrawn=" + std::to_string(redrawn) +
               fmt(" seconds=%.1f", secs));
}

void criterion6() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(6006);
    std::uniform_int_distribution<int> dn(1, 4);
    std::uniform_int_distribution<int> dm(1, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_gap = 0.0;
    double worst_kkt = 0.0;
    int cold_fail = 0;
    int warm_fail = 0;
    int warm_checked = 0;
    bool kkt_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        const int m = dm(rng);
        const int n = dn(rng);
        std::uniform_int_distribution<int> dh(1, 12 / m);
        const int h = dh(rng);
        const Instance in = random_instance(rng, n, m, false);
        const double omega = 0.1 + 0.9 * unit(rng);
        const CondensedQp qp = condense(in.model, in.w, omega, h);
        const Vector x = oracle::random_vector(rng, n, 2.0);

        const Vector zs = oracle_solution(qp, x, in.U);
        const Vector lo = in.U.lower().replicate(h, 1);
        const Vector hi = in.U.upper().replicate(h, 1);
        const double kkt = oracle::kkt_violation(qp.H(), qp.G() * x, lo, hi, zs);
        const double kkt_scale = std::max(1.0, (qp.G() * x).norm());
        worst_kkt = std::max(worst_kkt, kkt / kkt_scale);
        kkt_ok = kkt_ok && kkt <= 1e-8 * kkt_scale;
        const SolveResult limit = solve_to_tolerance(qp, x, in.U, 1e-12);
        worst_gap = std::max(worst_gap, (limit.z - zs).norm());

        const double start = qp.inverse_norm(qp.G() * x) / std::sqrt(qp.lambda_min());
        if (start > 0.0) {
            const double ebar = std::max(1e-9, (1e-6 + 0.5 * unit(rng)) * start);
            const int l = iter_bound_cold(qp, x, ebar);
            const SolveResult r = pgm_solve(qp, x, Vector::Zero(qp.dim()), l, in.U);
            cold_fail += (r.z - zs).norm() <= ebar ? 0 : 1;
        }
        if (h >= 2) {
            ++warm_checked;
            const CondensedQp next_qp = condense(in.model, in.w, omega, h - 1);
            const double ebar_prev = 1e-2 * unit(rng);
            const Vector z_prev =
                project_box(zs + ebar_prev * oracle::random_vector(rng, qp.dim()).normalized(), in.U);
            const double d_bar = 1e-2 * unit(rng);
            const Vector d = d_bar * unit(rng) * oracle::random_vector(rng, n).normalized();
            const Vector x_next = in.model.step(x, z_prev.head(m)) + d;
            const Vector warm = z_prev.tail(qp.dim() - m);
            const double ebar = 1e-5 + 1e-3 * unit(rng);
            const int l = iter_bound_warm(next_qp, ebar, ebar_prev, d_bar);
            const SolveResult r = pgm_solve(next_qp, x_next, warm, l, in.U);
            warm_fail += (r.z - oracle_solution(next_qp, x_next, in.U)).norm() <= ebar ? 0 : 1;
        }
    }
    const double secs = seconds_since(t0);
    report(6, worst_gap <= 1e-6 && kkt_ok && cold_fail == 0 && warm_fail == 0 && secs < 60.0,
           fmt("worst_gap=%.3g", worst_gap) + fmt(" worst_oracle_kkt=%.3g", worst_kkt) +
               " cold_failures=" + std::to_string(cold_fail) + "/100 warm_failures=" + std::to_string(warm_fail) +
               "/" + std::to_string(warm_checked) + fmt(" seconds=%.1f", secs));
}

void criterion7() {
    std::mt19937_64 rng(7007);
    std::uniform_int_distribution<int> dn(1, 4);
    std::uniform_int_distribution<int> dm(1, 2);
    std::uniform_int_distribution<int> dh(1, 12);
    std::uniform_real_distribution<double> domega(0.05, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dn(rng);
        const int m = dm(rng);
        const Instance in = random_instance(rng, n, m, false);
        const int h = dh(rng);
        const double omega = domega(rng);
        const CondensedQp qp = condense(in.model, in.w, omega, h);
        const Vector x = oracle::random_vector(rng, in.model.n());
        const Vector z = oracle::random_vector(rng, qp.dim());
        const double ref =
            oracle::simulated_cost(in.model.A(), in.model.B(), in.w.Q, in.w.R, in.w.P, omega, x, z);
        worst = std::max(worst, std::abs(eval_cost(qp, x, z) - ref) / std::abs(ref));
    }
    report(7, worst <= 1e-9, fmt("worst_rel=%.3g", worst) + " instances=100");
}

void criterion8(const Benchmark& b) {
    constexpr double slack = 1e-8;
    double worst = -std::numeric_limits<double>::infinity();
    int violations = 0;
    int restart_violations = 0;
    int checked = 0;
    for (const SimLog& log : b.runs) {
        for (const StepRecord& s : log.steps) {
            ++checked;
            const double excess = s.V - s.vbar;
            worst = std::max(worst, excess);
            if (!(excess <= slack)) {
                ++violations;
                restart_violations += s.delta_k == 0 ? 1 : 0;
            }
        }
    }
    report(8, violations == 0,
           "steps=" + std::to_string(checked) + " violations=" + std::to_string(violations) +
               " at_schedule_restarts=" + std::to_string(restart_violations) + fmt(" worst_excess=%.6g", worst));
}

void criterion9() {
    constexpr double slack = 1e-8;
    std::mt19937_64 rng(9009);
    std::uniform_int_distribution<int> dn(1, 4);
    std::uniform_int_distribution<int> dm(1, 2);
    std::uniform_int_distribution<int> dh(1, 6);
    double worst = -std::numeric_limits<double>::infinity();
    int instances = 0;
    for (int trial = 0; trial < 10; ++trial, ++instances) {
        const int n0 = dn(rng);
        const int m = dm(rng);
        const Instance in = random_instance(rng, n0, m, false);
        const CondensedQp qp = condense(in.model, in.w, 0.2 + 0.08 * trial, dh(rng));
        const Eigen::Index n = in.model.n();
        for (int s = 0; s < 200; ++s) {
            const Vector x = oracle::random_vector(rng, n, 2.0);
            const Vector y = oracle::random_vector(rng, n, 2.0);
            const Vector zx = oracle_solution(qp, x, in.U);
            const Vector zy = oracle_solution(qp, y, in.U);
            const Vector dz = zx - zy;
            const Vector Gd = qp.G() * (x - y);
            const double dzH2 = dz.dot(qp.H() * dz);
            const double psi_x = std::sqrt(std::max(0.0, eval_cost(qp, x, zx)));
            const double psi_y = std::sqrt(std::max(0.0, eval_cost(qp, y, zy)));
            worst = std::max({worst, dz.dot(Gd) + dzH2, std::sqrt(dzH2) - qp.inverse_norm(Gd),
                              std::abs(psi_x - psi_y) - std::sqrt((x - y).dot(qp.W() * (x - y)))});
        }
    }
    report(9, worst <= slack,
           "instances=" + std::to_string(instances) + " pairs_per_instance=200" + fmt(" worst_excess=%.3g", worst));
}

void criterion10() {
    const fs::path dir = fs::temp_directory_path() / "shmpc_acceptance";
    fs::create_directories(dir);
    const SimConfig cfg = spacecraft_preset();
    export_csv(run_closed_loop(cfg), dir / "first.csv");
    export_csv(run_closed_loop(cfg), dir / "second.csv");
    const std::string a = slurp(dir / "first.csv");
    const std::string b = slurp(dir / "second.csv");
    report(10, !a.empty() && a == b, "bytes=" + std::to_string(a.size()) + (a == b ? " identical" : " differ"));
}

} // namespace

int main() {
    try {
        const Benchmark bench = benchmark_runs();
        criterion1(bench);
        const SimConfig cfg = spacecraft_preset();
        const ModeComparison cmp = compare_modes(cfg);
        criterion2(cmp, cfg);
        criterion3(cmp);
        criterion4(cmp);
        criterion5();
        criterion6();
        criterion7();
        criterion8(bench);
        criterion9();
        criterion10();
    } catch (const Error& e) {
        std::printf("error: category=%s message=%s\n", std::string(to_string(e.category())).c_str(), e.what());
        return 1;
    }
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
