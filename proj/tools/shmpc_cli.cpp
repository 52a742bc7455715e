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
// Command-line front end: run, compare, sweep, check, preset.

#include "shmpc/config.hpp"
#include "shmpc/shmpc.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace shmpc;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Io: return 3;
    case ErrorCategory::Infeasible: return 5;
    default: return 4;
    }
}

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("SHMPC_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "shmpc_out";
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw Error(ErrorCategory::Config, "cannot parse number '" + cell + "'");
        }
    }
    return out;
}

void print_summary(const char* label, const SimLog& log) {
    std::cout << label << ": terminal_F=" << log.terminal_F << " alpha=" << log.alpha
              << " in_terminal_set=" << (log.success ? "yes" : "no") << " flops_total=" << log.flops_total
              << " cold_starts=" << log.cold_starts() << '\n';
}

void write_run(const SimLog& log, const fs::path& dir, const std::string& stem) {
    export_csv(log, dir / (stem + "_log.csv"));
    export_summary(log, dir / (stem + "_summary.csv"));
    emit_plot_data(log, dir / (stem + "_plot"));
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
    const SimConfig cfg = load_config(config_path);
    const SimLog log = run_closed_loop(cfg);
    const fs::path dir = output_dir(out_flag);
    write_run(log, dir, cfg.mode == ControlMode::Adaptive ? "adaptive" : "nominal");
    print_summary(cfg.mode == ControlMode::Adaptive ? "adaptive" : "nominal", log);
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_flag) {
    const SimConfig cfg = load_config(config_path);
    const ModeComparison cmp = compare_modes(cfg);
    const fs::path dir = output_dir(out_flag);
    write_run(cmp.nominal, dir, "nominal");
    write_run(cmp.adaptive, dir, "adaptive");
    {
        std::ofstream out = detail::open_for_write(dir / "comparison.csv");
        out << "k,omega_nominal,omega_adaptive,kappa_nominal,kappa_adaptive,iter_bound_nominal,iter_bound_adaptive,"
               "flops_nominal,flops_adaptive\n";
        for (std::size_t i = 0; i < cmp.nominal.steps.size(); ++i) {
            const StepRecord& a = cmp.nominal.steps[i];
            const StepRecord& b = cmp.adaptive.steps[i];
            out << a.k << ',' << a.omega << ',' << b.omega << ',' << a.kappa << ',' << b.kappa << ','
                << a.iter_bound << ',' << b.iter_bound << ',' << a.flops_step << ',' << b.flops_step << '\n';
        }
        detail::finish_write(out, dir / "comparison.csv");
    }
    print_summary("nominal", cmp.nominal);
    print_summary("adaptive", cmp.adaptive);
    std::cout << "kappa_dominance=" << (cmp.kappa_dominance ? "yes" : "no") << '\n';
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_flag, const std::string& omegas,
              const std::string& ks) {
    const SimConfig cfg = load_config(config_path);
    const LtiModel model = cfg.build_model();
    const CostWeights w = make_cost_weights(model, cfg.Q, cfg.R, cfg.alpha);
    std::vector<double> grid = omegas.empty() ? std::vector<double>{0.1, 0.25, 0.5, 0.75, 1.0} : parse_list(omegas);
    if (omegas.empty()) {
        for (double& g : grid) {
            g *= cfg.omega_prime_0;
        }
    }
    std::vector<SweepReport> reports;
    for (double kd : ks.empty() ? std::vector<double>{0.0} : parse_list(ks)) {
        const int k = static_cast<int>(kd);
        detail::require(k >= 0 && k < cfg.N, ErrorCategory::Config, "sweep k outside [0, N-1]");
        reports.push_back(kappa_sweep(model, w, cfg.N - k, grid, k));
        const SweepReport& r = reports.back();
        std::cout << "k=" << k << " horizon=" << r.horizon << " ratio_condition=" << (r.ratio_condition_ok ? "yes" : "no")
                  << " spectrum_monotone=" << (r.spectrum_monotone ? "yes" : "no")
                  << " kappa_monotone=" << (r.kappa_monotone ? "yes" : "no") << '\n';
    }
    const fs::path dir = output_dir(out_flag);
    fs::create_directories(dir);
    write_sweep_csv(reports, dir / "sweep.csv");
    std::cout << "wrote " << (dir / "sweep.csv").string() << '\n';
    return 0;
}

int cmd_check(const std::string& config_path, bool horizon_limit, bool strict) {
    const SimConfig cfg = load_config(config_path);
    const LtiModel model = cfg.build_model();
    const CostWeights w = make_cost_weights(model, cfg.Q, cfg.R, cfg.alpha);
    const BoxConstraint U(cfg.u_lower, cfg.u_upper);
    const double residual = dare_residual(model, w.Q, w.R, w.P);
    const double rho_cl = spectral_radius(model.A() - model.B() * w.K);
    const bool a3 = residual <= 1e-9 && rho_cl < 1.0;
    std::cout << "riccati: dare_residual=" << residual << " closed_loop_spectral_radius=" << rho_cl
              << " gamma=" << w.gamma << " pass=" << (a3 ? "yes" : "no") << '\n';

    const InvarianceReport inv = check_terminal_invariance(model, w, U, 10000, 42);
    std::cout << "terminal_invariance: samples=" << inv.samples << " max_violation=" << inv.max_violation
              << " pass=" << (inv.passed ? "yes" : "no") << '\n';

    bool ratio_ok = true;
    if (w.chi()) {
        const RatioConditionReport ratio = ratio_condition_check(model, w, cfg.N, cfg.omega_prime_0);
        ratio_ok = ratio.holds;
        std::cout << "ratio_condition(k=0): lhs=" << ratio.lhs << " rhs=" << ratio.rhs
                  << " gaps_simple=" << (ratio.eigen_gaps_ok ? "yes" : "no")
                  << " chain=" << (ratio.chain_ok ? "yes" : "no") << " pass=" << (ratio.holds ? "yes" : "no") << '\n';
        if (horizon_limit) {
            std::cout << "ratio_condition: N_kappa="
                      << ratio_condition_horizon_limit(model, w, cfg.N, cfg.omega_prime_0) << '\n';
        }
    } else {
        std::cout << "ratio_condition: inapplicable (R is not a multiple of the identity)\n";
        ratio_ok = false;
    }
    if (strict && !(a3 && inv.passed && ratio_ok)) {
        return 6;
    }
    return 0;
}

int cmd_preset(const std::string& name, const std::string& output) {
    detail::require(name == "spacecraft", ErrorCategory::Config, "unknown preset '" + name + "'");
    const std::string text = to_toml(spacecraft_preset());
    if (output.empty()) {
        std::cout << text;
        return 0;
    }
    std::ofstream out = detail::open_for_write(output);
    out << text;
    detail::finish_write(out, output);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shrinking-horizon MPC with an adjustable terminal weight"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    auto* run = app.add_subcommand("run", "closed-loop run from a config file");
    run->add_option("-c,--config", config, "TOML config")->required();
    run->add_option("-o,--out", out, "output directory (default: $SHMPC_OUTPUT_DIR or ./shmpc_out)");

    auto* compare = app.add_subcommand("compare", "nominal vs adaptive on the same disturbance realization");
    compare->add_option("-c,--config", config, "TOML config")->required();
    compare->add_option("-o,--out", out, "output directory");

    std::string omegas;
    std::string ks;
    auto* sweep = app.add_subcommand("sweep", "Hessian conditioning vs terminal weight");
    sweep->add_option("-c,--config", config, "TOML config")->required();
    sweep->add_option("-o,--out", out, "output directory");
    sweep->add_option("--omega", omegas, "comma-separated ascending weights (default 0.1,0.25,0.5,0.75,1 x omega'_0)");
    sweep->add_option("--k", ks, "comma-separated time instants (default 0)");

    bool horizon_limit = false;
    bool strict = false;
    auto* check = app.add_subcommand("check", "Riccati, terminal invariance and conditioning diagnostics");
    check->add_option("-c,--config", config, "TOML config")->required();
    check->add_flag("--horizon-limit", horizon_limit, "scan every k for the last instant the conditioning test holds");
    check->add_flag("--strict", strict, "exit with code 6 when any check fails");

    std::string preset_name;
    std::string preset_out;
    auto* preset = app.add_subcommand("preset", "emit a built-in configuration");
    preset->add_option("name", preset_name, "preset name (spacecraft)")->required();
    preset->add_option("-o,--output", preset_out, "write to file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: category=usage message=" << e.what() << '\n';
        return 2;
    }

    try {
        if (*run) {
            return cmd_run(config, out);
        }
        if (*compare) {
            return cmd_compare(config, out);
        }
        if (*sweep) {
            return cmd_sweep(config, out, omegas, ks);
        }
        if (*check) {
            return cmd_check(config, horizon_limit, strict);
        }
        if (*preset) {
            return cmd_preset(preset_name, preset_out);
        }
    } catch (const Error& e) {
        std::cerr << "error: category=" << to_string(e.category()) << " message=" << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: category=internal message=" << e.what() << '\n';
        return 1;
    }
    return 0;
}
