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
#ifndef SHMPC_CONFIG_HPP
#define SHMPC_CONFIG_HPP

#include "shmpc/common.hpp"
#include "shmpc/sim_harness.hpp"

#include <toml.hpp>

#include <filesystem>
#include <set>
#include <sstream>
#include <string>

namespace shmpc {

/**
 * TOML run configuration. Sections and keys:
 *
 *   [model]        kind, A, B, sampling_period, discretization, initial_state, input_lower, input_upper
 *   [cost]         Q, R, alpha
 *   [horizon]      N
 *   [disturbance]  kind, scale, bound, seed, sequence
 *   [solver]       mode, tolerance, log_value_function
 *   [adaptation]   mode, omega_prime_0, epsilon, omega_fraction, disturbance_share, freeze_weight,
 *                  omega_search, min_relative_decrease
 *
 * Unknown sections or keys are rejected.
 */
namespace config_detail {

[[noreturn]] inline void fail(const std::string& msg) { throw Error(ErrorCategory::Config, msg); }

inline void reject_unknown(const toml::table& t, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [key, _] : t) {
        if (!allowed.contains(std::string(key.str()))) {
            fail("unknown key '" + std::string(key.str()) + "' in " + where);
        }
    }
}

inline const toml::table& section(const toml::table& root, const char* name) {
    const toml::table* t = root[name].as_table();
    if (t == nullptr) {
        fail(std::string("missing section [") + name + "]");
    }
    return *t;
}

inline double number(const toml::node& node, const std::string& what) {
    if (auto v = node.value<double>()) {
        return *v;
    }
    fail(what + " must be a number");
}

inline double get_number(const toml::table& t, const char* key, const std::string& where) {
    const toml::node* n = t.get(key);
    if (n == nullptr) {
        fail(where + "." + key + " is required");
    }
    return number(*n, where + "." + key);
}

inline std::optional<double> opt_number(const toml::table& t, const char* key, const std::string& where) {
    const toml::node* n = t.get(key);
    if (n == nullptr) {
        return std::nullopt;
    }
    return number(*n, where + "." + key);
}

inline std::string get_string(const toml::table& t, const char* key, const std::string& where,
                              const std::string& fallback) {
    const toml::node* n = t.get(key);
    if (n == nullptr) {
        return fallback;
    }
    if (auto s = n->value<std::string>()) {
        return *s;
    }
    fail(where + "." + key + " must be a string");
}

inline Vector vector_from(const toml::node& node, const std::string& what) {
    const toml::array* a = node.as_array();
    if (a == nullptr) {
        fail(what + " must be an array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(a->size()));
    for (std::size_t i = 0; i < a->size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = number(*a->get(i), what);
    }
    return v;
}

inline Matrix matrix_from(const toml::node& node, const std::string& what) {
    const toml::array* rows = node.as_array();
    if (rows == nullptr || rows->empty()) {
        fail(what + " must be a non-empty array of rows");
    }
    Matrix M;
    for (std::size_t r = 0; r < rows->size(); ++r) {
        const Vector row = vector_from(*rows->get(r), what);
        if (r == 0) {
            M.resize(static_cast<Eigen::Index>(rows->size()), row.size());
        }
        if (row.size() != M.cols()) {
            fail(what + " has ragged rows");
        }
        M.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return M;
}

inline const toml::node& required(const toml::table& t, const char* key, const std::string& where) {
    const toml::node* n = t.get(key);
    if (n == nullptr) {
        fail(where + "." + key + " is required");
    }
    return *n;
}

} // namespace config_detail

inline SimConfig parse_config(std::string_view text, const std::string& source = "config") {
    using namespace config_detail;
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML parse error in " << source << ": " << e.description() << " at line " << e.source().begin.line;
        fail(msg.str());
    }
    reject_unknown(root, "top level", {"model", "cost", "horizon", "disturbance", "solver", "adaptation"});

    SimConfig c;
    {
        const toml::table& t = section(root, "model");
        reject_unknown(t, "[model]", {"kind", "A", "B", "sampling_period", "discretization", "initial_state",
                                      "input_lower", "input_upper"});
        const std::string kind = get_string(t, "kind", "model", "continuous");
        if (kind == "continuous") {
            c.model.kind = ModelSource::Kind::Continuous;
        } else if (kind == "discrete") {
            c.model.kind = ModelSource::Kind::Discrete;
        } else {
            fail("model.kind must be 'continuous' or 'discrete'");
        }
        c.model.A = matrix_from(required(t, "A", "model"), "model.A");
        c.model.B = matrix_from(required(t, "B", "model"), "model.B");
        c.model.sampling_period = opt_number(t, "sampling_period", "model").value_or(0.1);
        const std::string disc = get_string(t, "discretization", "model", "zoh");
        if (disc == "zoh") {
            c.model.discretization = Discretization::ZeroOrderHold;
        } else if (disc == "euler") {
            c.model.discretization = Discretization::ForwardEuler;
        } else {
            fail("model.discretization must be 'zoh' or 'euler'");
        }
        c.x0 = vector_from(required(t, "initial_state", "model"), "model.initial_state");
        c.u_lower = vector_from(required(t, "input_lower", "model"), "model.input_lower");
        c.u_upper = vector_from(required(t, "input_upper", "model"), "model.input_upper");
    }
    {
        const toml::table& t = section(root, "cost");
        reject_unknown(t, "[cost]", {"Q", "R", "alpha"});
        c.Q = matrix_from(required(t, "Q", "cost"), "cost.Q");
        c.R = matrix_from(required(t, "R", "cost"), "cost.R");
        c.alpha = get_number(t, "alpha", "cost");
    }
    {
        const toml::table& t = section(root, "horizon");
        reject_unknown(t, "[horizon]", {"N"});
        const auto N = t["N"].value<std::int64_t>();
        if (!N) {
            fail("horizon.N must be an integer");
        }
        c.N = static_cast<int>(*N);
    }
    if (const toml::table* t = root["disturbance"].as_table()) {
        reject_unknown(*t, "[disturbance]", {"kind", "scale", "bound", "seed", "sequence"});
        const std::string kind = get_string(*t, "kind", "disturbance", "uniform_ball");
        if (kind == "none") {
            c.disturbance.kind = DisturbanceConfig::Kind::None;
        } else if (kind == "uniform_ball") {
            c.disturbance.kind = DisturbanceConfig::Kind::UniformBall;
        } else if (kind == "fixed_sequence") {
            c.disturbance.kind = DisturbanceConfig::Kind::FixedSequence;
        } else {
            fail("disturbance.kind must be 'none', 'uniform_ball' or 'fixed_sequence'");
        }
        c.disturbance.scale = opt_number(*t, "scale", "disturbance").value_or(1.0);
        c.disturbance.bound = opt_number(*t, "bound", "disturbance");
        if (const toml::node* s = t->get("seed")) {
            const auto seed = s->value<std::int64_t>();
            if (!seed || *seed < 0) {
                fail("disturbance.seed must be a non-negative integer");
            }
            c.disturbance.seed = static_cast<std::uint64_t>(*seed);
        }
        if (const toml::node* s = t->get("sequence")) {
            const Matrix seq = matrix_from(*s, "disturbance.sequence");
            for (Eigen::Index r = 0; r < seq.rows(); ++r) {
                c.disturbance.sequence.emplace_back(seq.row(r).transpose());
            }
        }
    }
    if (const toml::table* t = root["solver"].as_table()) {
        reject_unknown(*t, "[solver]", {"mode", "tolerance", "log_value_function"});
        const std::string mode = get_string(*t, "mode", "solver", "certified");
        if (mode == "certified") {
            c.solver = SolverMode::CertifiedBounds;
        } else if (mode == "tolerance") {
            c.solver = SolverMode::Tolerance;
        } else {
            fail("solver.mode must be 'certified' or 'tolerance'");
        }
        c.solver_tolerance = opt_number(*t, "tolerance", "solver").value_or(1e-10);
        if (const toml::node* b = t->get("log_value_function")) {
            const auto v = b->value_exact<bool>();
            if (!v) {
                fail("solver.log_value_function must be a boolean");
            }
            c.log_value_function = *v;
        }
    }
    if (const toml::table* t = root["adaptation"].as_table()) {
        reject_unknown(*t, "[adaptation]",
                       {"mode", "omega_prime_0", "epsilon", "omega_fraction", "disturbance_share", "freeze_weight",
                        "omega_search", "min_relative_decrease"});
        const std::string mode = get_string(*t, "mode", "adaptation", "adaptive");
        if (mode == "adaptive") {
            c.mode = ControlMode::Adaptive;
        } else if (mode == "nominal") {
            c.mode = ControlMode::Nominal;
        } else {
            fail("adaptation.mode must be 'adaptive' or 'nominal'");
        }
        c.omega_prime_0 = opt_number(*t, "omega_prime_0", "adaptation").value_or(1.0);
        c.epsilon = opt_number(*t, "epsilon", "adaptation").value_or(1e-8);
        c.omega_fraction = opt_number(*t, "omega_fraction", "adaptation").value_or(0.0);
        c.disturbance_share = opt_number(*t, "disturbance_share", "adaptation").value_or(0.5);
        c.min_relative_decrease = opt_number(*t, "min_relative_decrease", "adaptation").value_or(0.05);
        for (auto [key, dst] : {std::pair{"freeze_weight", &c.freeze_weight}, std::pair{"omega_search", &c.omega_search}}) {
            if (const toml::node* b = t->get(key)) {
                const auto v = b->value_exact<bool>();
                if (!v) {
                    fail(std::string("adaptation.") + key + " must be a boolean");
                }
                *dst = *v;
            }
        }
    }
    c.validate();
    return c;
}

inline SimConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCategory::Io, "cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

namespace config_detail {

inline toml::array to_array(const Vector& v) {
    toml::array a;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}

inline toml::array to_array(const Matrix& M) {
    toml::array rows;
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        rows.push_back(to_array(Vector(M.row(r).transpose())));
    }
    return rows;
}

} // namespace config_detail

inline std::string to_toml(const SimConfig& c) {
    using config_detail::to_array;
    toml::table model{
        {"kind", c.model.kind == ModelSource::Kind::Continuous ? "continuous" : "discrete"},
        {"A", to_array(c.model.A)},
        {"B", to_array(c.model.B)},
        {"sampling_period", c.model.sampling_period},
        {"discretization", c.model.discretization == Discretization::ZeroOrderHold ? "zoh" : "euler"},
        {"initial_state", to_array(c.x0)},
        {"input_lower", to_array(c.u_lower)},
        {"input_upper", to_array(c.u_upper)},
    };
    toml::table cost{{"Q", to_array(c.Q)}, {"R", to_array(c.R)}, {"alpha", c.alpha}};
    toml::table horizon{{"N", static_cast<std::int64_t>(c.N)}};
    const char* dkind = c.disturbance.kind == DisturbanceConfig::Kind::None          ? "none"
                        : c.disturbance.kind == DisturbanceConfig::Kind::UniformBall ? "uniform_ball"
                                                                                     : "fixed_sequence";
    toml::table disturbance{{"kind", dkind},
                            {"scale", c.disturbance.scale},
                            {"seed", static_cast<std::int64_t>(c.disturbance.seed)}};
    if (c.disturbance.bound) {
        disturbance.insert("bound", *c.disturbance.bound);
    }
    if (!c.disturbance.sequence.empty()) {
        toml::array seq;
        for (const Vector& d : c.disturbance.sequence) {
            seq.push_back(to_array(d));
        }
        disturbance.insert("sequence", std::move(seq));
    }
    toml::table solver{{"mode", c.solver == SolverMode::CertifiedBounds ? "certified" : "tolerance"},
                       {"tolerance", c.solver_tolerance},
                       {"log_value_function", c.log_value_function}};
    toml::table adaptation{{"mode", c.mode == ControlMode::Adaptive ? "adaptive" : "nominal"},
                           {"omega_prime_0", c.omega_prime_0},
                           {"epsilon", c.epsilon},
                           {"omega_fraction", c.omega_fraction},
                           {"disturbance_share", c.disturbance_share},
                           {"freeze_weight", c.freeze_weight},
                           {"omega_search", c.omega_search},
                           {"min_relative_decrease", c.min_relative_decrease}};
    toml::table root{{"model", std::move(model)},       {"cost", std::move(cost)},
                     {"horizon", std::move(horizon)},   {"disturbance", std::move(disturbance)},
                     {"solver", std::move(solver)},     {"adaptation", std::move(adaptation)}};
    std::ostringstream out;
    out << toml::toml_formatter(root, toml::format_flags::none) << '\n';
    return out.str();
}

} // namespace shmpc

#endif // SHMPC_CONFIG_HPP
