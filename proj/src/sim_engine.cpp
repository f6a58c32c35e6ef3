#include "dcmg/sim_engine.hpp"

#include "dcmg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcmg {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t event_node(const Event& e) {
    return std::visit([](const auto& a) { return a.node; }, e.action);
}

/// Step index at which an event time is applied: first grid point >= t.
std::size_t snap_to_grid(double t, double dt) {
    const double k = t / dt;
    const double rounded = std::round(k);
    if (std::abs(k - rounded) <= 1e-9 * std::max(1.0, k)) {
        return static_cast<std::size_t>(rounded);
    }
    return static_cast<std::size_t>(std::ceil(k));
}

std::size_t integral_ratio(double a, double b, const char* what) {
    const double r = a / b;
    const double rounded = std::round(r);
    if (!(rounded >= 1.0) || std::abs(r - rounded) > 1e-9 * rounded) {
        throw ModelError(std::string(what) + " must be a positive integer multiple of dt");
    }
    return static_cast<std::size_t>(rounded);
}

/// Mutable parameter set of a run, advanced event by event.
struct LiveParameters {
    Network net;
    ControllerConfig cfg;
    std::vector<JunctionDemand> demand;

    void apply(const Event& e, int index, const Vector* V_now) {
        const auto node = event_node(e);
        if (node >= net.n_nodes()) {
            throw ScenarioError("event " + std::to_string(index) + ": node index out of range", index);
        }
        const auto dgu = net.dgu_index(node);
        std::visit(overloaded{
                       [&](const SetZip& a) {
                           try {
                               net = net.with_zip(a.node, a.load);
                           } catch (const ModelError& err) {
                               throw ScenarioError("event " + std::to_string(index) + ": " + err.what(), index);
                           }
                       },
                       [&](const SetJunctionDemand& a) {
                           if (net.nodes()[a.node].kind != NodeKind::Junction) {
                               throw ScenarioError("event " + std::to_string(index) +
                                                       ": junction demand targets DGU node '" +
                                                       net.nodes()[a.node].label + "'",
                                                   index);
                           }
                           demand[a.node] = a.demand;
                       },
                       [&](const SetJunctionPowerStep& a) {
                           if (net.nodes()[a.node].kind != NodeKind::Junction) {
                               throw ScenarioError("event " + std::to_string(index) +
                                                       ": junction power step targets DGU node '" +
                                                       net.nodes()[a.node].label + "'",
                                                   index);
                           }
                           // Validation passes no voltage; the current is only known at run time.
                           const double V = V_now != nullptr ? (*V_now)[idx(a.node)] : 1.0;
                           demand[a.node] = JunctionDemand{a.P / V, 0.0};
                       },
                       [&](const SetReference& a) {
                           if (!dgu) {
                               throw ScenarioError("event " + std::to_string(index) +
                                                       ": reference change at junction node '" +
                                                       net.nodes()[a.node].label + "'",
                                                   index);
                           }
                           cfg.V_d_star[idx(*dgu)] = a.V_d_star;
                       },
                       [&](const SetGains& a) {
                           if (!dgu) {
                               throw ScenarioError("event " + std::to_string(index) +
                                                       ": gain change at junction node '" +
                                                       net.nodes()[a.node].label + "'",
                                                   index);
                           }
                           cfg.T_c[idx(*dgu)] = a.T_c;
                           cfg.K_c[idx(*dgu)] = a.K_c;
                       },
                   },
                   e.action);
    }

    void check(int index) const {
        auto fail = [&](const std::string& why) {
            if (index < 0) {
                throw ScenarioError("initial setup: " + why, index);
            }
            throw ScenarioError("event " + std::to_string(index) + ": " + why, index);
        };
        try {
            cfg.validate(net);
            std::vector<ZipLoad> dgu_loads;
            for (std::size_t node : net.dgu_nodes()) {
                dgu_loads.push_back(net.nodes()[node].zip);
            }
            if (!check_voltage_power_condition(as_span(cfg.V_d_star), dgu_loads)) {
                fail("reference at or below sqrt(P/G) of its constant-power load");
            }
        } catch (const ScenarioError&) {
            throw;
        } catch (const std::exception& err) {
            fail(err.what());
        }
    }

    [[nodiscard]] std::vector<ZipLoad> loads() const { return effective_loads(net, demand); }
};

MonitorSample compute_monitor(double t, const SystemState& state, const Vector& v_c, const LiveParameters& p,
                              const Vector& u_star, std::span<const ZipLoad> loads, double nominal_voltage) {
    StateDerivative d(state.layout());
    plant_rhs_into(state, p.net, loads, d);
    d.du() = v_c;

    MonitorSample m;
    m.t = t;
    m.S = storage_S(d, p.net);
    m.S_d = storage_Sd(d, state.u(), u_star, p.cfg, p.net);
    m.S_d_dot_analytic = dissipation_rate(d, v_c, state, p.net, p.cfg, loads);
    m.supply_rate = supply_rate(d, v_c, state, p.net);
    const auto pc = passivity_check(d, v_c, state, p.net, loads);
    m.passivity_margin = pc.margin;
    m.passivity_scale = pc.scale;
    m.in_zip_region = check_zip_region(as_span(state.V()), loads);

    m.max_voltage_deviation_pct.resize(idx(p.net.n_nodes()));
    for (std::size_t i = 0; i < p.net.n_nodes(); ++i) {
        const auto dgu = p.net.dgu_index(i);
        const double ref = dgu ? p.cfg.V_d_star[idx(*dgu)] : nominal_voltage;
        m.max_voltage_deviation_pct[idx(i)] =
            ref > 0.0 ? 100.0 * std::abs(state.V()[idx(i)] - ref) / ref : 0.0;
    }
    return m;
}

}  // namespace

std::string describe(const Event& event, const Network& net) {
    const auto node = event_node(event);
    const std::string label = node < net.n_nodes() ? net.nodes()[node].label : std::to_string(node);
    std::ostringstream os;
    os << "t=" << event.t << " s: ";
    std::visit(overloaded{
                   [&](const SetZip& a) {
                       os << "set ZIP load at node " << label << " to G=" << a.load.G << " S, I=" << a.load.I
                          << " A, P=" << a.load.P << " W";
                   },
                   [&](const SetJunctionDemand& a) {
                       os << "set junction demand at node " << label << " to I=" << a.demand.I
                          << " A, P=" << a.demand.P << " W";
                   },
                   [&](const SetJunctionPowerStep& a) {
                       os << "junction power step at node " << label << " to " << a.P << " W (held as current)";
                   },
                   [&](const SetReference& a) { os << "set reference at node " << label << " to " << a.V_d_star << " V"; },
                   [&](const SetGains& a) {
                       os << "set gains at node " << label << " to T_c=" << a.T_c << ", K_c=" << a.K_c;
                   },
               },
               event.action);
    return os.str();
}

void validate_scenario(const Scenario& s) {
    const auto layout = StateLayout::of(s.network);
    if (!(s.dt > 0.0) || !std::isfinite(s.dt)) {
        throw ModelError("scenario: dt must be > 0");
    }
    if (!(s.duration >= 0.0) || !std::isfinite(s.duration)) {
        throw ModelError("scenario: duration must be >= 0");
    }
    (void)integral_ratio(s.record_dt, s.dt, "record_dt");
    if (!(s.initial.layout() == layout)) {
        throw ModelError("scenario: initial state does not match the network");
    }
    if (!s.initial.flat().allFinite()) {
        throw ModelError("scenario: initial state has non-finite entries");
    }
    if ((s.initial.V().array() <= 0.0).any()) {
        throw ModelError("scenario: initial voltages must be positive");
    }
    if (s.demand.size() != s.network.n_nodes()) {
        throw ModelError("scenario: junction demand needs one entry per node");
    }
    for (std::size_t i = 0; i < s.demand.size(); ++i) {
        if (s.demand[i] != JunctionDemand{} && s.network.nodes()[i].kind != NodeKind::Junction) {
            throw ModelError("scenario: demand at DGU node '" + s.network.nodes()[i].label + "'");
        }
    }
    for (std::size_t j = 0; j < s.network.n_dgu(); ++j) {
        const double u = s.initial.u()[idx(j)];
        if (u < s.controller.u_min || u > s.controller.u_max) {
            throw ModelError("scenario: initial duty at node '" + s.network.nodes()[s.network.dgu_nodes()[j]].label +
                             "' outside the saturation bounds");
        }
    }

    LiveParameters p{s.network, s.controller, s.demand};
    p.check(-1);
    double last_t = 0.0;
    for (std::size_t e = 0; e < s.events.size(); ++e) {
        const auto& ev = s.events[e];
        const int index = static_cast<int>(e);
        if (!(ev.t >= 0.0) || !std::isfinite(ev.t)) {
            throw ScenarioError("event " + std::to_string(index) + ": time must be >= 0", index);
        }
        if (ev.t < last_t) {
            throw ScenarioError("event " + std::to_string(index) + ": events must be sorted by time", index);
        }
        last_t = ev.t;
        p.apply(ev, index, nullptr);
        p.check(index);
    }
}

Vector rk4_step(const Vector& x, double dt, const FlatRhs& rhs) {
    if (!(dt > 0.0)) {
        throw ModelError("rk4_step: dt must be > 0");
    }
    Rk4Workspace ws;
    Vector out = x;
    rk4_step_into(out, dt, rhs, ws);
    return out;
}

ClosedLoop::ClosedLoop(const Network& net, const ControllerConfig& cfg, std::vector<ZipLoad> loads)
    : net_(&net),
      cfg_(&cfg),
      loads_(std::move(loads)),
      u_star_(duty_reference(source_voltages(net), cfg.V_d_star)),
      stage_(StateLayout::of(net)),
      deriv_(StateLayout::of(net)) {}

void ClosedLoop::operator()(const Vector& x, Vector& dx) {
    stage_.flat() = x;
    plant_rhs_into(stage_, *net_, loads_, deriv_);
    const auto& dgu = net_->dgu_nodes();
    auto du = deriv_.du();
    for (std::size_t j = 0; j < dgu.size(); ++j) {
        const auto jj = idx(j);
        const auto node = idx(dgu[j]);
        du[jj] = control_law_node(stage_.u()[jj], u_star_[jj], deriv_.dI_s()[jj], deriv_.dV()[node],
                                  stage_.I_s()[jj], stage_.V()[node], cfg_->T_c[jj], cfg_->K_c[jj]);
    }
    dx = deriv_.flat();
}

StateDerivative ClosedLoop::derivative(const SystemState& state, Vector* v_c) {
    Vector dx;
    (*this)(state.flat(), dx);
    StateDerivative d(state.layout(), std::move(dx));
    if (v_c != nullptr) {
        *v_c = d.du();
    }
    return d;
}

Trajectory run(const Scenario& s) {
    validate_scenario(s);

    const auto layout = StateLayout::of(s.network);
    const auto n_dgu = s.network.n_dgu();
    const std::size_t n_steps = s.duration > 0.0 ? static_cast<std::size_t>(std::floor(s.duration / s.dt + 1e-9)) : 0;
    const std::size_t stride = integral_ratio(s.record_dt, s.dt, "record_dt");
    const std::size_t decimation = s.controller.decimation;
    const bool continuous = s.controller.derivative_mode == DerivativeMode::Ideal && decimation == 1;
    const double dt_ctrl = s.dt * static_cast<double>(decimation);

    Trajectory traj;
    traj.layout = layout;
    traj.dt = s.dt;
    traj.record_dt = s.record_dt;
    traj.dgu_nodes = s.network.dgu_nodes();
    for (const auto& node : s.network.nodes()) {
        traj.node_labels.push_back(node.label);
    }
    for (const auto& line : s.network.lines()) {
        traj.line_labels.push_back(line.label);
    }
    for (std::size_t node : s.network.dgu_nodes()) {
        traj.dgu_labels.push_back(s.network.nodes()[node].label);
    }
    traj.samples.reserve(n_steps / stride + 1);

    std::vector<std::size_t> event_step(s.events.size());
    for (std::size_t e = 0; e < s.events.size(); ++e) {
        event_step[e] = snap_to_grid(s.events[e].t, s.dt);
    }

    LiveParameters p{s.network, s.controller, s.demand};
    auto loads = p.loads();
    auto closed_loop = std::make_unique<ClosedLoop>(p.net, p.cfg, loads);

    SystemState state = s.initial;
    Vector v_c = Vector::Zero(idx(n_dgu));
    std::vector<bool> sat(n_dgu, false);

    std::vector<LevantState> lev_I(n_dgu, LevantState::for_bound(s.controller.levant_bound_current));
    std::vector<LevantState> lev_V(n_dgu, LevantState::for_bound(s.controller.levant_bound_voltage));
    for (std::size_t j = 0; j < n_dgu; ++j) {
        lev_I[j].z0 = state.I_s()[idx(j)];
        lev_V[j].z0 = state.V()[idx(s.network.dgu_nodes()[j])];
    }

    SystemState stage(layout);
    StateDerivative stage_deriv(layout);
    auto held_rhs = [&](const Vector& x, Vector& dx) {
        stage.flat() = x;
        plant_rhs_into(stage, p.net, loads, stage_deriv);
        stage_deriv.du() = v_c;
        dx = stage_deriv.flat();
    };

    Rk4Workspace ws;
    std::size_t next_event = 0;
    for (std::size_t k = 0;; ++k) {
        bool changed = false;
        while (next_event < s.events.size() && event_step[next_event] <= k) {
            const int index = static_cast<int>(next_event);
            const Vector V_now = state.V();
            p.apply(s.events[next_event], index, &V_now);
            p.check(index);
            traj.applied_events.push_back({index, s.events[next_event].t, static_cast<double>(k) * s.dt, k});
            ++next_event;
            changed = true;
        }
        if (changed) {
            loads = p.loads();
            closed_loop = std::make_unique<ClosedLoop>(p.net, p.cfg, loads);
        }

        if (continuous) {
            (void)closed_loop->derivative(state, &v_c);
        } else if (k % decimation == 0) {
            Vector dI_s(idx(n_dgu));
            Vector dV(idx(n_dgu));
            if (s.controller.derivative_mode == DerivativeMode::Levant) {
                for (std::size_t j = 0; j < n_dgu; ++j) {
                    const auto node = idx(s.network.dgu_nodes()[j]);
                    std::tie(lev_I[j], dI_s[idx(j)]) = levant_step(lev_I[j], state.I_s()[idx(j)], dt_ctrl);
                    std::tie(lev_V[j], dV[idx(j)]) = levant_step(lev_V[j], state.V()[node], dt_ctrl);
                }
            } else {
                const auto d = plant_rhs(state, p.net, p.demand);
                dI_s = d.dI_s();
                dV = dgu_values(p.net, d.dV());
            }
            v_c = control_law(state.u(), closed_loop->u_star(), dI_s, dV, state.I_s(),
                              dgu_values(p.net, state.V()), p.cfg);
        }

        if (k % stride == 0) {
            TrajectorySample sample;
            sample.t = static_cast<double>(k) * s.dt;
            sample.x = state.flat();
            sample.v_c = v_c;
            sample.V_d_star = p.cfg.V_d_star;
            sample.monitor = compute_monitor(sample.t, state, v_c, p, closed_loop->u_star(), loads, s.nominal_voltage);
            sample.saturated = sat;
            traj.samples.push_back(std::move(sample));
            std::fill(sat.begin(), sat.end(), false);
        }
        if (k >= n_steps) {
            break;
        }

        Vector next = state.flat();
        try {
            if (continuous) {
                rk4_step_into(next, s.dt, *closed_loop, ws);
            } else {
                rk4_step_into(next, s.dt, held_rhs, ws);
            }
        } catch (const DomainError& err) {
            traj.termination = Termination::DomainExit;
            traj.message = "t=" + std::to_string(static_cast<double>(k) * s.dt) + " s: " + err.what();
            break;
        }
        SystemState candidate(layout, std::move(next));
        if (!candidate.flat().allFinite() || (candidate.V().array() <= 0.0).any()) {
            traj.termination = Termination::DomainExit;
            traj.message = "t=" + std::to_string(static_cast<double>(k + 1) * s.dt) +
                           " s: voltage left the domain V > 0";
            break;
        }
        for (std::size_t j = 0; j < n_dgu; ++j) {
            double& u = candidate.u()[idx(j)];
            if (u < p.cfg.u_min) {
                u = p.cfg.u_min;
                sat[j] = true;
            } else if (u > p.cfg.u_max) {
                u = p.cfg.u_max;
                sat[j] = true;
            }
        }
        state = std::move(candidate);
    }
    return traj;
}

}  // namespace dcmg
