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
#ifndef SHMPC_SIM_HARNESS_HPP
#define SHMPC_SIM_HARNESS_HPP

#include "shmpc/adaptation.hpp"
#include "shmpc/box.hpp"
#include "shmpc/common.hpp"
#include "shmpc/condensing.hpp"
#include "shmpc/dynamics.hpp"
#include "shmpc/pgm_solver.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace shmpc {

struct ModelSource {
    enum class Kind { Continuous, Discrete };
    Kind kind = Kind::Continuous;
    Matrix A;
    Matrix B;
    double sampling_period = 0.1;
    Discretization discretization = Discretization::ZeroOrderHold;
};

struct DisturbanceConfig {
    enum class Kind { None, UniformBall, FixedSequence };
    Kind kind = Kind::UniformBall;
    /// Fraction of the current d_bar used as the ball radius.
    double scale = 1.0;
    /// Explicit ball radius; overrides scale * d_bar when set.
    std::optional<double> bound;
    std::uint64_t seed = 42;
    std::vector<Vector> sequence;
};

enum class ControlMode { Nominal, Adaptive };
enum class SolverMode { CertifiedBounds, Tolerance };

struct SimConfig {
    ModelSource model;
    int N = 1;
    Matrix Q;
    Matrix R;
    double omega_prime_0 = 1.0;
    double alpha = 1.0;
    Vector u_lower;
    Vector u_upper;
    Vector x0;
    DisturbanceConfig disturbance;
    ControlMode mode = ControlMode::Adaptive;
    SolverMode solver = SolverMode::CertifiedBounds;
    double solver_tolerance = 1e-10;
    /// Compute V_{N-k}(x_k) and the solver error with a high-accuracy reference solve each step.
    bool log_value_function = true;
    double epsilon = 1e-8;
    double omega_fraction = 0.0;
    double disturbance_share = 0.5;
    bool freeze_weight = false;
    bool omega_search = false;
    double min_relative_decrease = 0.05;

    void validate() const {
        detail::require(N >= 1, ErrorCategory::Config, "N must be at least 1");
        detail::require(x0.size() > 0 && x0.allFinite(), ErrorCategory::Config, "x0 must be finite");
        detail::require(disturbance.scale >= 0.0 && disturbance.scale <= 1.0, ErrorCategory::Config,
                        "disturbance scale must lie in [0, 1]");
        detail::require(omega_prime_0 > 0.0 && alpha > 0.0 && epsilon > 0.0, ErrorCategory::Config,
                        "omega'_0, alpha and epsilon must be positive");
        detail::require(omega_fraction >= 0.0 && omega_fraction <= 1.0, ErrorCategory::Config,
                        "omega_fraction must lie in [0, 1]");
        detail::require(min_relative_decrease > 0.0 && min_relative_decrease < 1.0, ErrorCategory::Config,
                        "min_relative_decrease must lie in (0, 1)");
        detail::require(disturbance_share >= 0.0 && disturbance_share < 1.0, ErrorCategory::Config,
                        "disturbance_share must lie in [0, 1)");
        if (disturbance.kind == DisturbanceConfig::Kind::FixedSequence) {
            detail::require(static_cast<int>(disturbance.sequence.size()) >= N, ErrorCategory::Config,
                            "fixed disturbance sequence shorter than N");
        }
    }

    [[nodiscard]] LtiModel build_model() const {
        if (model.kind == ModelSource::Kind::Discrete) {
            return {model.A, model.B};
        }
        return discretize(model.A, model.B, model.sampling_period, model.discretization);
    }
};

/// Axisymmetric spacecraft spin stabilization: q' = a r, r' = -a q + M_c / E_y.
inline SimConfig spacecraft_preset() {
    constexpr double p = 1.0;
    constexpr double E_y = 1.0;
    constexpr double E_x = 0.05;
    const double a = p * (E_y - E_x) / E_y;

    SimConfig c;
    c.model.kind = ModelSource::Kind::Continuous;
    c.model.A = (Matrix(2, 2) << 0.0, a, -a, 0.0).finished();
    c.model.B = (Matrix(2, 1) << 0.0, 1.0 / E_y).finished();
    c.model.sampling_period = 0.1;
    c.model.discretization = Discretization::ZeroOrderHold;
    c.N = 200;
    c.Q = Matrix::Identity(2, 2);
    c.R = Matrix::Constant(1, 1, 3.0);
    c.omega_prime_0 = 1.0;
    c.alpha = 13.2667;
    c.u_lower = Vector::Constant(1, -0.5);
    c.u_upper = Vector::Constant(1, 0.5);
    c.x0 = (Vector(2) << 0.9, 0.9).finished();
    c.disturbance.kind = DisturbanceConfig::Kind::UniformBall;
    c.disturbance.scale = 1.0;
    c.disturbance.seed = 42;
    c.mode = ControlMode::Adaptive;
    c.solver = SolverMode::CertifiedBounds;
    c.disturbance_share = 1.0 / 7.0;
    c.omega_search = true;
    return c;
}

struct StepRecord {
    int k = 0;
    Vector x;
    Vector u;
    double omega = 0.0;
    double kappa = 1.0;
    int iter_bound = 0;
    int iters_run = 0;
    std::int64_t flops_step = 0;
    double V = std::numeric_limits<double>::quiet_NaN();       ///< V_{N-k}(x_k), reference solve
    double F_x = 0.0;
    double beta_prime = 0.0;
    double beta_prime_alt = 0.0;
    double d_bar = 0.0;
    double vbar = 0.0;                                          ///< Vbar_k of the schedule in force
    double ebar = 0.0;
    double solver_error = std::numeric_limits<double>::quiet_NaN(); ///< ||z_k - z*_k||
    double disturbance_norm = 0.0;
    int delta_k = 0;
    bool cold_start = false;
};

struct SimLog {
    int N = 0;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    double alpha = 0.0;
    std::vector<StepRecord> steps;
    Vector terminal_state;
    double terminal_F = 0.0;
    std::int64_t flops_total = 0;
    bool success = false;

    [[nodiscard]] int cold_starts() const {
        int c = 0;
        for (const StepRecord& s : steps) {
            c += s.cold_start ? 1 : 0;
        }
        return c;
    }
};

namespace detail {

class DisturbanceGenerator {
public:
    DisturbanceGenerator(const DisturbanceConfig& cfg, Eigen::Index n) : cfg_(cfg), n_(n), rng_(cfg.seed) {}

    /// d_k for a ball radius scale * d_bar (or the explicit bound).
    Vector draw(int k, double d_bar) {
        switch (cfg_.kind) {
        case DisturbanceConfig::Kind::None:
            return Vector::Zero(n_);
        case DisturbanceConfig::Kind::FixedSequence:
            return cfg_.sequence.at(static_cast<std::size_t>(k));
        case DisturbanceConfig::Kind::UniformBall:
            break;
        }
        Vector dir(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            dir(i) = normal_(rng_);
        }
        const double u = uniform_(rng_);
        const double radius = cfg_.bound ? *cfg_.bound : cfg_.scale * d_bar;
        const double norm = dir.norm();
        if (norm == 0.0 || radius == 0.0) {
            return Vector::Zero(n_);
        }
        // Radius u^{1/n} r gives a uniform draw in the n-ball.
        return dir / norm * (radius * std::pow(u, 1.0 / static_cast<double>(n_)));
    }

private:
    DisturbanceConfig cfg_;
    Eigen::Index n_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace detail

/**
 * @brief Closed-loop shrinking-horizon MPC run.
 *
 * Each step condenses the horizon-(N-k) problem at the current terminal weight,
 * picks the cold or warm iteration bound, runs that many PGM iterations from zero
 * or from the shifted previous solution, applies the first move and propagates
 * the plant with a bounded disturbance.
 */
inline SimLog run_closed_loop(const SimConfig& cfg, CondensedQpCache* shared_cache = nullptr) {
    cfg.validate();
    const LtiModel model = cfg.build_model();
    detail::require(cfg.x0.size() == model.n(), ErrorCategory::Config, "x0 does not match the model state size");
    const BoxConstraint U(cfg.u_lower, cfg.u_upper);
    detail::require(U.dim() == model.m(), ErrorCategory::Config, "input box does not match the model input size");

    std::optional<CondensedQpCache> own_cache;
    CondensedQpCache* cache = shared_cache;
    if (cache == nullptr) {
        own_cache.emplace(model, make_cost_weights(model, cfg.Q, cfg.R, cfg.alpha));
    }
    if (cache == nullptr) {
        cache = &*own_cache;
    }
    const CostWeights& w = cache->weights();
    const int N = cfg.N;
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();

    AdaptContext ctx;
    ctx.model = &model;
    ctx.weights = &w;
    ctx.U = &U;
    ctx.N = N;
    ctx.cache = cache;
    ctx.options.omega_prime_0 = cfg.omega_prime_0;
    ctx.options.epsilon = cfg.epsilon;
    ctx.options.omega_fraction = cfg.omega_fraction;
    ctx.options.omega_search = cfg.omega_search;
    ctx.options.min_relative_decrease = cfg.min_relative_decrease;
    ctx.options.disturbance_share = cfg.disturbance_share;
    ctx.options.freeze_weight = cfg.freeze_weight || cfg.mode == ControlMode::Nominal;

    detail::DisturbanceGenerator disturbance(cfg.disturbance, n);
    SimLog log;
    log.N = N;
    log.n = n;
    log.m = m;
    log.alpha = w.alpha;

    Vector x = cfg.x0;
    AdaptState state;
    std::optional<SolveResult> prev;
    double ebar_prev = 0.0;
    for (int k = 0; k < N; ++k) {
        const int horizon = N - k;
        OnlineStepResult step = online_step(ctx, k, state, x, prev ? &*prev : nullptr);
        state = std::move(step.state);

        const CondensedQp& qp = cache->get(horizon, state.omega);
        const double ebar = state.schedule.ebar_at(k);
        StepRecord rec;
        rec.k = k;
        rec.x = x;
        rec.omega = state.omega;
        rec.kappa = qp.kappa();
        rec.cold_start = step.cold_start;
        rec.delta_k = state.delta_k;
        rec.beta_prime = state.beta_prime;
        rec.beta_prime_alt = state.beta_prime_alt;
        rec.d_bar = state.d_bar();
        rec.vbar = state.schedule.vbar_at(k);
        rec.ebar = ebar;
        rec.F_x = w.terminal_cost(x);
        rec.iter_bound = step.cold_start ? iter_bound_cold(qp, x, ebar)
                                         : iter_bound_warm(qp, ebar, ebar_prev, state.d_bar());

        SolveResult sol = cfg.solver == SolverMode::CertifiedBounds
                              ? pgm_solve(qp, x, step.warm_start, rec.iter_bound, U)
                              : pgm_solve(qp, x, step.warm_start, 10'000'000, U,
                                          {PgmMode::Tolerance, cfg.solver_tolerance});
        rec.iters_run = sol.iterations_run;
        rec.flops_step = static_cast<std::int64_t>(sol.iterations_run) * flops_per_iteration(horizon, m, n);
        log.flops_total += rec.flops_step;

        if (cfg.log_value_function) {
            const SolveResult ref = pgm_solve(qp, x, sol.z, 50'000'000, U, {PgmMode::Tolerance, 1e-13});
            rec.V = ref.cost;
            rec.solver_error = (sol.z - ref.z).norm();
        }

        rec.u = sol.z.head(m);
        const Vector d = disturbance.draw(k, state.d_bar());
        rec.disturbance_norm = d.norm();
        x = model.step(x, rec.u) + d;
        ebar_prev = ebar;
        prev = std::move(sol);
        log.steps.push_back(std::move(rec));
    }
    log.terminal_state = x;
    log.terminal_F = w.terminal_cost(x);
    log.success = log.terminal_F <= w.alpha;
    return log;
}

struct ModeComparison {
    SimLog nominal;
    SimLog adaptive;
    /// kappa_adaptive(k) <= kappa_nominal(k), strictly (relative margin 1e-10) wherever omega_k < omega'_0
    /// and the Hessian has more than one row; a scalar Hessian has kappa = 1 for every weight.
    bool kappa_dominance = true;
    int first_violation = -1;
};

inline ModeComparison compare_modes(SimConfig cfg) {
    const LtiModel model = cfg.build_model();
    CondensedQpCache cache(model, make_cost_weights(model, cfg.Q, cfg.R, cfg.alpha));
    ModeComparison out;
    cfg.mode = ControlMode::Nominal;
    out.nominal = run_closed_loop(cfg, &cache);
    cfg.mode = ControlMode::Adaptive;
    out.adaptive = run_closed_loop(cfg, &cache);
    for (std::size_t i = 0; i < out.nominal.steps.size(); ++i) {
        const StepRecord& a = out.adaptive.steps[i];
        const StepRecord& b = out.nominal.steps[i];
        const bool reduced = a.omega < cfg.omega_prime_0 && (out.nominal.N - a.k) * out.nominal.m > 1;
        const bool ok = reduced ? a.kappa < b.kappa * (1.0 - 1e-10) : a.kappa <= b.kappa * (1.0 + 1e-12);
        if (!ok && out.kappa_dominance) {
            out.kappa_dominance = false;
            out.first_violation = static_cast<int>(i);
        }
    }
    return out;
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCategory::Io, "cannot open " + path.string() + " for writing");
    out.precision(17);
    return out;
}

inline void finish_write(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    require(static_cast<bool>(out), ErrorCategory::Io, "write failed for " + path.string());
}

} // namespace detail

/// Column order of export_csv, with x_i and u_j expanded per component.
inline std::vector<std::string> log_columns(Eigen::Index n, Eigen::Index m) {
    std::vector<std::string> cols{"k"};
    for (Eigen::Index i = 0; i < n; ++i) {
        cols.push_back("x" + std::to_string(i));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        cols.push_back("u" + std::to_string(j));
    }
    for (const char* c : {"omega", "kappa", "iter_bound", "iters_run", "flops_step", "V", "F_x", "beta_prime",
                          "beta_prime_alt", "d_bar", "vbar", "ebar", "solver_error", "disturbance_norm", "delta_k",
                          "cold_start"}) {
        cols.emplace_back(c);
    }
    return cols;
}

inline void export_csv(const SimLog& log, const std::filesystem::path& path) {
    std::ofstream out = detail::open_for_write(path);
    const auto cols = log_columns(log.n, log.m);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out << (i ? "," : "") << cols[i];
    }
    out << '\n';
    for (const StepRecord& s : log.steps) {
        out << s.k;
        for (Eigen::Index i = 0; i < s.x.size(); ++i) {
            out << ',' << s.x(i);
        }
        for (Eigen::Index j = 0; j < s.u.size(); ++j) {
            out << ',' << s.u(j);
        }
        out << ',' << s.omega << ',' << s.kappa << ',' << s.iter_bound << ',' << s.iters_run << ',' << s.flops_step
            << ',' << s.V << ',' << s.F_x << ',' << s.beta_prime << ',' << s.beta_prime_alt << ',' << s.d_bar << ','
            << s.vbar << ',' << s.ebar << ',' << s.solver_error << ',' << s.disturbance_norm << ',' << s.delta_k
            << ',' << (s.cold_start ? 1 : 0) << '\n';
    }
    detail::finish_write(out, path);
}

/// key,value summary: totals and the terminal state.
inline void export_summary(const SimLog& log, const std::filesystem::path& path) {
    std::ofstream out = detail::open_for_write(path);
    out << "key,value\n";
    out << "N," << log.N << '\n';
    out << "alpha," << log.alpha << '\n';
    out << "terminal_F," << log.terminal_F << '\n';
    out << "success," << (log.success ? 1 : 0) << '\n';
    out << "flops_total," << log.flops_total << '\n';
    out << "cold_starts," << log.cold_starts() << '\n';
    for (Eigen::Index i = 0; i < log.terminal_state.size(); ++i) {
        out << "terminal_x" << i << ',' << log.terminal_state(i) << '\n';
    }
    detail::finish_write(out, path);
}

/// One file per panel: states, controls, terminal weight, Hessian condition number, iteration bounds.
inline void emit_plot_data(const SimLog& log, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    detail::require(!ec, ErrorCategory::Io, "cannot create " + dir.string());

    {
        const auto path = dir / "states.csv";
        std::ofstream out = detail::open_for_write(path);
        out << "k";
        for (Eigen::Index i = 0; i < log.n; ++i) {
            out << ",x" << i;
        }
        out << ",F_x\n";
        for (const StepRecord& s : log.steps) {
            out << s.k;
            for (Eigen::Index i = 0; i < s.x.size(); ++i) {
                out << ',' << s.x(i);
            }
            out << ',' << s.F_x << '\n';
        }
        if (log.terminal_state.size() == log.n) {
            out << log.N;
            for (Eigen::Index i = 0; i < log.n; ++i) {
                out << ',' << log.terminal_state(i);
            }
            out << ',' << log.terminal_F << '\n';
        }
        detail::finish_write(out, path);
    }
    auto series = [&](const char* file, const char* column, auto getter) {
        const auto path = dir / file;
        std::ofstream out = detail::open_for_write(path);
        out << "k," << column << '\n';
        for (const StepRecord& s : log.steps) {
            out << s.k << ',' << getter(s) << '\n';
        }
        detail::finish_write(out, path);
    };
    series("controls.csv", "u0", [](const StepRecord& s) { return s.u.size() ? s.u(0) : 0.0; });
    series("omega.csv", "omega", [](const StepRecord& s) { return s.omega; });
    series("kappa.csv", "kappa", [](const StepRecord& s) { return s.kappa; });
    series("iteration_bounds.csv", "iter_bound", [](const StepRecord& s) { return s.iter_bound; });
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        throw Error(ErrorCategory::Io, "missing column " + name);
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCategory::Io, "cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            t.header.push_back(cell);
        }
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        detail::require(row.size() == t.header.size(), ErrorCategory::Io, "ragged row in " + path.string());
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace shmpc

#endif // SHMPC_SIM_HARNESS_HPP
