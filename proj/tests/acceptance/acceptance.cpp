// Acceptance checks for the simulator. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.

#include "dcmg/analysis.hpp"
#include "dcmg/equilibrium.hpp"
#include "dcmg/scenario.hpp"
#include "dcmg/verify.hpp"
#include "fixtures.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

using namespace dcmg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

struct Outcome {
    bool passed;
    std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %-26s %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.passed ? 0 : 1;
}

Vector rse_duty() {
    return duty_reference(Vector::Constant(2, 278.0), Vector::Constant(2, 380.0));
}

double rel_diff(const Equilibrium& a, const Equilibrium& b) {
    const Vector x = a.as_state().flat(), y = b.as_state().flat();
    return (x - y).lpNorm<Eigen::Infinity>() / std::max(1.0, y.lpNorm<Eigen::Infinity>());
}

/// RSE network with a ZIP load at junction 1 that satisfies the
/// constant-power voltage condition (sqrt(P/G) = 316 V < 380 V).
Network rse_loaded() { return rse_network().with_zip(0, {0.2, 5.0, 20e3}); }

Outcome equilibrium_correctness() {
    const auto start = Clock::now();
    std::string detail;
    bool ok = true;
    for (const auto& [label, net] : {std::pair{"unloaded", rse_network()}, std::pair{"loaded", rse_loaded()}}) {
        const auto cf = steady_state_closed_form(rse_duty(), net);
        SystemState guess = cf.as_state();
        guess.V() *= 1.05;
        guess.I_s().array() += 10.0;
        guess.I().array() -= 3.0;
        const auto nw = steady_state_newton(guess, net, rse_duty());
        const double rel = rel_diff(nw, cf);
        const double dev = std::max(std::abs(cf.V_bar[1] - 380.0), std::abs(cf.V_bar[3] - 380.0));
        const double balance = verify_current_balance(cf, net);
        ok = ok && nw.feasible && rel < 1e-8 && dev < 1e-9 && balance < 1e-9;
        detail += fmt("%s: newton rel %.2g, |V2,4-380| %.2g V, balance %.2g A; ", label, rel, dev, balance);
    }
    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 1.0;
    return {ok, detail + fmt("%.3f s", elapsed)};
}

struct ScenarioRun {
    Trajectory traj;
    VerifyReport report;
    double seconds;
};

ScenarioRun run_preset(const std::string& name) {
    const auto start = Clock::now();
    auto traj = run(build_scenario(*find_preset(name)));
    const double elapsed = seconds_since(start);
    auto report = verify_trajectory(traj);
    return {std::move(traj), std::move(report), elapsed};
}

Outcome convergence(const ScenarioRun& r) {
    bool ok = r.seconds < 300.0;
    std::string detail;
    for (const char* check : {"completed", "convergence", "in_zip_region", "sd_monotone"}) {
        const auto& c = r.report.find(check);
        ok = ok && c.passed;
        detail += std::string(check) + (c.passed ? " ok" : " FAILED") + " (" + c.detail + "); ";
    }
    return {ok, detail + fmt("%.1f s", r.seconds)};
}

Outcome deviation(const ScenarioRun& a, const ScenarioRun& b) {
    const auto& ca = a.report.find("deviation_bounds");
    const auto& cb = b.report.find("deviation_bounds");
    return {ca.passed && cb.passed, "1a: " + ca.detail + "; 1b: " + cb.detail};
}

Outcome passivity_suite() {
    std::mt19937_64 rng(20240611);
    const int n_states = 1000;
    const double h = 1e-5;
    double worst_margin = 0.0;
    double worst_fd = 0.0, worst_fd_fine = 0.0;
    int violations = 0;
    for (int trial = 0; trial < n_states; ++trial) {
        const auto net = testing::random_network(rng, 6);
        const auto cfg = testing::random_controller(rng, net);
        const auto loads = net.zip_loads();
        const auto state = testing::random_state(rng, net);
        if (!check_zip_region(as_span(state.V()), loads)) {
            return {false, "generator produced a state outside the region"};
        }
        ClosedLoop f(net, cfg, loads);
        Vector v_c;
        const auto d = f.derivative(state, &v_c);
        const auto pc = passivity_check(d, v_c, state, net, loads);
        worst_margin = std::min(worst_margin, pc.margin / pc.scale);
        violations += pc.margin < -1e-6 * pc.scale ? 1 : 0;

        auto Sd_at = [&](double step) {
            Rk4Workspace ws;
            Vector x = state.flat();
            rk4_step_into(x, step, f, ws);
            const SystemState s(state.layout(), x);
            return storage_Sd(f.derivative(s), s.u(), f.u_star(), cfg, net);
        };
        const double analytic = dissipation_rate(d, v_c, state, net, cfg, loads);
        auto rel_error = [&](double step) {
            const double fd = (Sd_at(step) - Sd_at(-step)) / (2.0 * step);
            return std::abs(fd - analytic) / std::abs(analytic);
        };
        worst_fd = std::max(worst_fd, rel_error(h));
        worst_fd_fine = std::max(worst_fd_fine, rel_error(h / 10.0));
    }
    return {violations == 0 && worst_fd < 1e-4,
            fmt("%d states, %d margin violations (min margin/scale %.3g); dS_d/dt vs centered FD: max rel error "
                "%.3g at h=1e-5 (bound 1e-4), %.3g at h=1e-6 (ratio %.1f, O(h^2) truncation)",
                n_states, violations, worst_margin, worst_fd, worst_fd_fine, worst_fd / worst_fd_fine)};
}

Outcome integrator_order() {
    const FlatRhs decay = [](const Vector& x, Vector& dx) { dx = -x; };
    Vector y = Vector::Ones(1);
    for (int k = 0; k < 1000; ++k) {
        y = rk4_step(y, 1e-3, decay);
    }
    const double decay_error = std::abs(y[0] - std::exp(-1.0));

    auto final_state = [](double dt) {
        auto c = *find_preset("rse_base");
        c.duration = 0.02;
        c.dt = dt;
        c.record_dt = 0.02;
        auto s = build_scenario(c);
        s.demand[0] = {20e3 / 380.0, 0.0};
        return run(s).samples.back().x;
    };
    const Vector a = final_state(4e-5), b = final_state(2e-5), c = final_state(1e-5);
    const double order = std::log2((a - b).lpNorm<Eigen::Infinity>() / (b - c).lpNorm<Eigen::Infinity>());
    return {std::abs(order - 4.0) <= 0.3 && decay_error < 1e-9,
            fmt("observed order %.3f (dt 40/20/10 us), linear decay error %.2g", order, decay_error)};
}

Outcome uniqueness() {
    std::mt19937_64 rng(7);
    std::string detail;
    bool ok = true;
    for (const auto& [label, net] : {std::pair{"unloaded", rse_network()}, std::pair{"loaded", rse_loaded()}}) {
        std::vector<Vector> roots;
        int failed = 0;
        for (int start = 0; start < 20; ++start) {
            SystemState guess(StateLayout::of(net));
            for (Eigen::Index i = 0; i < guess.V().size(); ++i) guess.V()[i] = testing::uniform(rng, 340.0, 420.0);
            for (Eigen::Index j = 0; j < guess.I_s().size(); ++j) guess.I_s()[j] = testing::uniform(rng, -100.0, 200.0);
            for (Eigen::Index k = 0; k < guess.I().size(); ++k) guess.I()[k] = testing::uniform(rng, -100.0, 100.0);
            const auto eq = steady_state_newton(guess, net, rse_duty());
            if (!eq.feasible) {
                ++failed;
                continue;
            }
            roots.push_back(eq.as_state().flat());
        }
        double spread = 0.0;
        for (std::size_t i = 0; i < roots.size(); ++i) {
            for (std::size_t j = i + 1; j < roots.size(); ++j) {
                spread = std::max(spread, (roots[i] - roots[j]).lpNorm<Eigen::Infinity>());
            }
        }
        ok = ok && failed == 0 && spread < 1e-6;
        detail += fmt("%s: %zu/20 converged, max pairwise distance %.2g; ", label, roots.size(), spread);
    }
    return {ok, detail};
}

Outcome determinism() {
    std::string detail;
    bool ok = true;
    for (const auto& name : preset_names()) {
        const auto scenario = build_scenario(*find_preset(name));
        const auto first = format_csv(run(scenario));
        const auto second = format_csv(run(scenario));
        const bool same = first == second;
        ok = ok && same;
        detail += name + (same ? " identical" : " DIFFERS") + fmt(" (%zu bytes); ", first.size());
    }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string only = argc > 1 ? argv[1] : "";
    auto wanted = [&](const char* name) { return only.empty() || only == name; };

    std::optional<ScenarioRun> s1a;
    auto scenario1a = [&]() -> const ScenarioRun& {
        if (!s1a) s1a = run_preset("rse_scenario1a");
        return *s1a;
    };

    if (wanted("equilibrium_correctness")) report("equilibrium_correctness", equilibrium_correctness);
    if (wanted("convergence_scenario1a")) report("convergence_scenario1a", [&] { return convergence(scenario1a()); });
    if (wanted("deviation_bounds"))
        report("deviation_bounds", [&] { return deviation(scenario1a(), run_preset("rse_scenario1b")); });
    if (wanted("passivity_suite")) report("passivity_suite", passivity_suite);
    if (wanted("integrator_order")) report("integrator_order", integrator_order);
    if (wanted("newton_uniqueness")) report("newton_uniqueness", uniqueness);
    if (wanted("determinism")) report("determinism", determinism);

    std::printf("%d failed\n", failures);
    return failures == 0 ? 0 : 1;
}
