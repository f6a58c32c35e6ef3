#pragma once

#include "dcmg/analysis.hpp"
#include "dcmg/controller.hpp"
#include "dcmg/dynamics.hpp"

#include <functional>
#include <memory>
#include <span>
#include <tuple>
#include <string>
#include <variant>
#include <vector>

namespace dcmg {

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

struct SetZip {
    std::size_t node = 0;
    ZipLoad load;
    bool operator==(const SetZip&) const = default;
};

struct SetJunctionDemand {
    std::size_t node = 0;
    JunctionDemand demand;
    bool operator==(const SetJunctionDemand&) const = default;
};

struct SetReference {
    std::size_t node = 0;
    double V_d_star = 0.0;
    bool operator==(const SetReference&) const = default;
};

struct SetGains {
    std::size_t node = 0;
    double T_c = 0.0;
    double K_c = 0.0;
    bool operator==(const SetGains&) const = default;
};

/// Junction power step: `P` watts are converted to a current with the node
/// voltage at the instant the event fires, and that current is then held.
struct SetJunctionPowerStep {
    std::size_t node = 0;
    double P = 0.0;
    bool operator==(const SetJunctionPowerStep&) const = default;
};

using EventAction = std::variant<SetZip, SetJunctionDemand, SetJunctionPowerStep, SetReference, SetGains>;

struct Event {
    double t = 0.0;
    EventAction action;
    bool operator==(const Event&) const = default;
};

[[nodiscard]] std::string describe(const Event& event, const Network& net);

// ---------------------------------------------------------------------------
// Scenario / trajectory
// ---------------------------------------------------------------------------

struct Scenario {
    std::string name;
    Network network;
    ControllerConfig controller;
    SystemState initial;
    std::vector<JunctionDemand> demand;  // one entry per node, junctions only nonzero
    std::vector<Event> events;           // sorted by t
    double dt = 1e-5;
    double record_dt = 1e-3;
    double duration = 1.0;
    /// Reference for the deviation monitor at junction nodes (V).
    double nominal_voltage = 0.0;
};

/// Raised when a scenario, or an event inside it, violates the feasibility
/// conditions. `event_index` is -1 for problems with the initial setup.
class ScenarioError : public InfeasibleError {
public:
    ScenarioError(const std::string& what, int event_index)
        : InfeasibleError(what), event_index_(event_index) {}
    [[nodiscard]] int event_index() const { return event_index_; }

private:
    int event_index_;
};

/// Checks shapes, grid compatibility, controller feasibility (reference not
/// below source voltage, duty reference inside the bounds) and the
/// constant-power condition at DGU nodes, for the initial setup and after
/// every event in order.
void validate_scenario(const Scenario& scenario);

struct TrajectorySample {
    double t = 0.0;
    Vector x;    // flat state (I_s, V, I, u)
    Vector v_c;
    Vector V_d_star;
    MonitorSample monitor;
    std::vector<bool> saturated;  // any clamp since the previous sample
};

struct AppliedEvent {
    int index = 0;
    double t_requested = 0.0;
    double t_applied = 0.0;
    std::size_t step = 0;
};

enum class Termination { Completed, DomainExit };

struct Trajectory {
    StateLayout layout;
    std::vector<std::string> node_labels;
    std::vector<std::string> line_labels;
    std::vector<std::string> dgu_labels;
    std::vector<std::size_t> dgu_nodes;
    std::vector<TrajectorySample> samples;
    std::vector<AppliedEvent> applied_events;
    Termination termination = Termination::Completed;
    std::string message;
    double dt = 0.0;
    double record_dt = 0.0;

    [[nodiscard]] SystemState state(std::size_t sample) const { return SystemState(layout, samples.at(sample).x); }
};

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

using FlatRhs = std::function<void(const Vector& x, Vector& dx)>;

/// Classical fourth-order Runge-Kutta step.
[[nodiscard]] Vector rk4_step(const Vector& x, double dt, const FlatRhs& rhs);

/// Reusable buffers for rk4_step_into.
struct Rk4Workspace {
    Vector k1, k2, k3, k4, tmp;
};

template <class Rhs>
void rk4_step_into(Vector& x, double dt, Rhs&& rhs, Rk4Workspace& ws) {
    ws.tmp.resize(x.size());
    rhs(x, ws.k1);
    ws.tmp = x + (0.5 * dt) * ws.k1;
    rhs(ws.tmp, ws.k2);
    ws.tmp = x + (0.5 * dt) * ws.k2;
    rhs(ws.tmp, ws.k3);
    ws.tmp = x + dt * ws.k3;
    rhs(ws.tmp, ws.k4);
    x += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

/// Ideal-derivative closed loop x' = F(x) for fixed parameters: plant
/// right-hand side with du = v_c evaluated from the exact derivatives.
class ClosedLoop {
public:
    ClosedLoop(const Network& net, const ControllerConfig& cfg, std::vector<ZipLoad> loads);

    void operator()(const Vector& x, Vector& dx);

    /// Derivative (with du = v_c) at a state; also returns v_c.
    StateDerivative derivative(const SystemState& state, Vector* v_c = nullptr);

    [[nodiscard]] const Vector& u_star() const { return u_star_; }
    [[nodiscard]] std::span<const ZipLoad> loads() const { return loads_; }

private:
    const Network* net_;
    const ControllerConfig* cfg_;
    std::vector<ZipLoad> loads_;
    Vector u_star_;
    SystemState stage_;
    StateDerivative deriv_;
};

/// Integrates the scenario over [0, duration]. Events are applied exactly
/// once, at the first grid point at or after their time. A voltage leaving
/// V > 0 ends the run early with Termination::DomainExit, keeping every
/// sample recorded so far.
[[nodiscard]] Trajectory run(const Scenario& scenario);

}  // namespace dcmg
