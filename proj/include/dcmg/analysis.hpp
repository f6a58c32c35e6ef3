#pragma once

// Krasovskii-type storage functions evaluated on the state derivatives,
// their dissipation identities, and the passivity slack.
//
//   S    = 1/2 (dI_s' L_s dI_s + dV' C dV + dI' L dI)
//   S_d  = S + 1/2 (u - u_d*)' K_c (u - u_d*)
//   dS_d = -dV' (G - [V]^-2 [P]) dV - dI' R dI - v_c' T_c v_c
//
// The load terms always use the loads actually seen by each node, i.e. the
// ZIP loads with any junction demand folded in (see effective_loads).

#include "dcmg/controller.hpp"
#include "dcmg/dynamics.hpp"

#include <span>

namespace dcmg {

struct MonitorSample {
    double t = 0.0;
    double S = 0.0;
    double S_d = 0.0;
    double S_d_dot_analytic = 0.0;
    double supply_rate = 0.0;
    double passivity_margin = 0.0;
    double passivity_scale = 0.0;
    bool in_zip_region = false;
    /// |V_i - V_ref,i| / V_ref,i in percent, per node.
    Vector max_voltage_deviation_pct;
};

[[nodiscard]] double storage_S(const StateDerivative& deriv, const Network& net);

[[nodiscard]] double storage_Sd(const StateDerivative& deriv, const Vector& u, const Vector& u_star,
                                const ControllerConfig& cfg, const Network& net);

/// v_c' (dI_s o V - dV o I_s), DGU-local quantities.
[[nodiscard]] double supply_rate(const StateDerivative& deriv, const Vector& v_c, const SystemState& state,
                                 const Network& net);

/// Closed-form time derivative of S_d along the closed loop.
[[nodiscard]] double dissipation_rate(const StateDerivative& deriv, const Vector& v_c, const SystemState& state,
                                      const Network& net, const ControllerConfig& cfg,
                                      std::span<const ZipLoad> loads);

/// Second time derivatives (d2I_s, d2V, d2I) from differentiating the plant
/// equations along a trajectory with du/dt = v_c; the du block holds zero.
[[nodiscard]] StateDerivative second_derivative(const SystemState& state, const StateDerivative& deriv,
                                                const Vector& v_c, const Network& net,
                                                std::span<const ZipLoad> loads);

/// dS/dt computed from the second derivatives (no closed-form identity).
[[nodiscard]] double storage_rate(const SystemState& state, const StateDerivative& deriv, const Vector& v_c,
                                  const Network& net, std::span<const ZipLoad> loads);

struct PassivityCheck {
    double margin = 0.0;  // supply_rate - dS/dt
    double scale = 0.0;   // magnitude of the terms involved
    bool violated = false;
};

/// Slack of the dissipation inequality dS/dt <= supply rate. Violated when
/// margin < -tolerance * scale.
[[nodiscard]] PassivityCheck passivity_check(const StateDerivative& deriv, const Vector& v_c,
                                             const SystemState& state, const Network& net,
                                             std::span<const ZipLoad> loads, double tolerance = 1e-6);

}  // namespace dcmg
