#pragma once

// Decentralized passivity-based voltage controller
//
//   T_c v_c = -K_c (u - u_d*) - (dI_s o V - dV o I_s),   du/dt = v_c
//
// Node i only ever reads its own u_i, I_s,i, V_i and their derivatives.

#include "dcmg/net_model.hpp"

#include <utility>
#include <vector>

namespace dcmg {

enum class DerivativeMode {
    Ideal,   // derivatives taken from the plant right-hand side
    Levant,  // derivatives estimated from sampled measurements
};

inline constexpr double kDefaultDutyMargin = 1e-3;

struct ControllerConfig {
    Vector T_c;       // per DGU, > 0
    Vector K_c;       // per DGU, > 0
    Vector V_d_star;  // per DGU, V
    DerivativeMode derivative_mode = DerivativeMode::Ideal;
    double u_min = 0.0;
    double u_max = 1.0 - kDefaultDutyMargin;
    /// Controller output is recomputed every `decimation` integrator steps
    /// and held in between. 1 means continuous-time evaluation.
    std::size_t decimation = 1;
    /// Bounds on |d^2 I_s/dt^2| (A/s^2) and |d^2 V/dt^2| (V/s^2) used to size
    /// the differentiator gains in Levant mode.
    double levant_bound_current = 1e6;
    double levant_bound_voltage = 1e6;

    /// Uniform gains and reference for every DGU of `net`.
    static ControllerConfig uniform(const Network& net, double T_c, double K_c, double V_d_star);

    /// Throws ModelError on shape/gain problems and InfeasibleError when a
    /// reference is below the local source voltage.
    void validate(const Network& net) const;

    bool operator==(const ControllerConfig& o) const {
        return T_c == o.T_c && K_c == o.K_c && V_d_star == o.V_d_star &&
               derivative_mode == o.derivative_mode && u_min == o.u_min && u_max == o.u_max &&
               decimation == o.decimation && levant_bound_current == o.levant_bound_current &&
               levant_bound_voltage == o.levant_bound_voltage;
    }
};

/// u_d* = 1 - V_s* / V_d*, componentwise. Throws InfeasibleError if some
/// V_d* < V_s*.
[[nodiscard]] Vector duty_reference(const Vector& V_s_star, const Vector& V_d_star);

/// Source voltages of the DGUs of `net`, in DGU order.
[[nodiscard]] Vector source_voltages(const Network& net);

[[nodiscard]] inline double control_law_node(double u, double u_star, double dI_s, double dV,
                                             double I_s, double V, double T_c, double K_c) {
    return (-K_c * (u - u_star) - (dI_s * V - dV * I_s)) / T_c;
}

/// Controller output for every DGU. All vectors are in DGU order.
[[nodiscard]] Vector control_law(const Vector& u, const Vector& u_star, const Vector& dI_s,
                                 const Vector& dV, const Vector& I_s, const Vector& V,
                                 const ControllerConfig& cfg);

struct SaturatedDuty {
    Vector u;
    std::vector<bool> saturated;
};

[[nodiscard]] SaturatedDuty saturate_duty(const Vector& u, double u_min, double u_max);

/// First-order robust exact differentiator (sliding-mode):
///   z0' = -l0 |z0 - f|^(1/2) sign(z0 - f) + z1
///   z1' = -l1 sign(z0 - f)
/// z1 is the derivative estimate.
struct LevantState {
    double z0 = 0.0;
    double z1 = 0.0;
    double lambda0 = 1.0;
    double lambda1 = 1.0;

    /// Gains l0 = 6 sqrt(L), l1 = 4 L for signals with |f''| <= L.
    static LevantState for_bound(double second_derivative_bound);
};

/// One explicit Euler update with sample period dt. Returns the new state and
/// the derivative estimate.
[[nodiscard]] std::pair<LevantState, double> levant_step(const LevantState& state, double sample,
                                                         double dt);

}  // namespace dcmg
