#include "dcmg/equilibrium.hpp"
#include "dcmg/scenario.hpp"
#include "dcmg/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using namespace dcmg;

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;

struct Overrides {
    std::string output_dir;
    std::optional<double> dt;
    std::optional<double> duration;
};

ScenarioConfig load(const std::string& config, const Overrides& o) {
    auto c = load_config(config);
    if (o.dt) {
        c.dt = *o.dt;
        if (c.record_dt < c.dt) {
            c.record_dt = c.dt;
        }
    }
    if (o.duration) {
        c.duration = *o.duration;
    }
    return c;
}

std::filesystem::path output_path(const ScenarioConfig& c, const Overrides& o) {
    std::filesystem::path name = c.output.empty() ? c.name + ".csv" : c.output;
    if (o.output_dir.empty()) {
        return name;
    }
    std::filesystem::create_directories(o.output_dir);
    return std::filesystem::path(o.output_dir) / name.filename();
}

int cmd_run(const std::string& config, const Overrides& o) {
    const auto c = load(config, o);
    const auto scenario = build_scenario(c);
    const auto traj = run(scenario);
    const auto path = output_path(c, o);
    emit_csv(traj, path);
    std::printf("%s: %zu samples -> %s\n", c.name.c_str(), traj.samples.size(), path.string().c_str());
    if (traj.termination != Termination::Completed) {
        std::fprintf(stderr, "run ended early: %s\n", traj.message.c_str());
        return kExitViolation;
    }
    return kExitOk;
}

int cmd_equilibrium(const std::string& config, const Overrides& o) {
    const auto c = load(config, o);
    const auto scenario = build_scenario(c);
    const auto& net = scenario.network;
    const Vector u_star = duty_reference(source_voltages(net), scenario.controller.V_d_star);
    const auto eq = steady_state_closed_form(u_star, net, scenario.demand);

    nlohmann::ordered_json out;
    out["name"] = c.name;
    auto& V = out["V_bar_volt"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        V[net.nodes()[i].label] = eq.V_bar[static_cast<Eigen::Index>(i)];
    }
    auto& I_s = out["I_s_bar_ampere"] = nlohmann::ordered_json::object();
    auto& u = out["u_bar"] = nlohmann::ordered_json::object();
    for (std::size_t j = 0; j < net.dgu_nodes().size(); ++j) {
        const auto& label = net.nodes()[net.dgu_nodes()[j]].label;
        I_s[label] = eq.I_s_bar[static_cast<Eigen::Index>(j)];
        u[label] = eq.u_bar[static_cast<Eigen::Index>(j)];
    }
    auto& I = out["I_bar_ampere"] = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < net.n_lines(); ++k) {
        I[net.lines()[k].label] = eq.I_bar[static_cast<Eigen::Index>(k)];
    }
    out["residual"] = eq.residual_norm;
    out["current_balance_residual_ampere"] = verify_current_balance(eq, net, scenario.demand);
    out["feasible"] = eq.feasible;
    out["in_zip_region"] = eq.in_zip_region;
    std::cout << out.dump(2) << '\n';
    return eq.feasible ? kExitOk : kExitViolation;
}

int cmd_verify(const std::string& config, const Overrides& o) {
    const auto c = load(config, o);
    const auto scenario = build_scenario(c);
    const auto traj = run(scenario);
    if (!o.output_dir.empty()) {
        emit_csv(traj, output_path(c, o));
    }
    const auto report = verify_trajectory(traj);
    for (const auto& check : report.checks) {
        std::printf("%-4s %-17s %s\n", check.passed ? "ok" : "FAIL", check.name.c_str(), check.detail.c_str());
    }
    std::printf("%s: %s\n", c.name.c_str(), report.passed() ? "all checks passed" : "violations found");
    return report.passed() ? kExitOk : kExitViolation;
}

int cmd_show_config(const std::string& config) {
    std::cout << to_json(load_config(config)).dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DC microgrid boost-converter simulator"};
    app.require_subcommand(1);

    Overrides overrides;
    std::string config;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config, "config file or preset name")->required();
        sub->add_option("--output-dir", overrides.output_dir, "directory for CSV output");
        sub->add_option("--dt", overrides.dt, "integration step (s)")->check(CLI::PositiveNumber);
        sub->add_option("--duration", overrides.duration, "simulated time (s)")->check(CLI::PositiveNumber);
    };

    auto* run_cmd = app.add_subcommand("run", "simulate and write the trajectory CSV");
    add_common(run_cmd);
    auto* eq_cmd = app.add_subcommand("equilibrium", "print the equilibrium as JSON");
    add_common(eq_cmd);
    auto* verify_cmd = app.add_subcommand("verify", "simulate and evaluate the invariant suite");
    add_common(verify_cmd);
    auto* show_cmd = app.add_subcommand("show-config", "print a config (or preset) as JSON");
    show_cmd->add_option("config", config, "config file or preset name")->required();
    auto* list_cmd = app.add_subcommand("list-presets", "list built-in scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return kExitConfig;
    }

    try {
        if (*run_cmd) return cmd_run(config, overrides);
        if (*eq_cmd) return cmd_equilibrium(config, overrides);
        if (*verify_cmd) return cmd_verify(config, overrides);
        if (*show_cmd) return cmd_show_config(config);
        if (*list_cmd) {
            for (const auto& name : preset_names()) {
                std::printf("%s\n", name.c_str());
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitViolation;
    }
    return kExitConfig;
}
