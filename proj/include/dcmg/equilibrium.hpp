#pragma once

#include "dcmg/dynamics.hpp"

#include <span>

namespace dcmg {

struct Equilibrium {
    Vector I_s_bar;
    Vector V_bar;
    Vector I_bar;
    Vector u_bar;
    bool feasible = false;
    bool in_zip_region = false;
    /// max-norm of (L_s dI_s, C dV, L dI) at the point, in V and A.
    double residual_norm = 0.0;
    /// Newton updates taken (0 when the start point already satisfied the tolerance).
    int iterations = 0;

    [[nodiscard]] SystemState as_state() const { return SystemState::from_parts(I_s_bar, V_bar, I_bar, u_bar); }
};

struct EquilibriumOptions {
    double feasibility_tol = 1e-9;   // on residual_norm
    double junction_tol = 1e-12;     // A, junction KCL mismatch
    int max_iterations = 100;
};

/// Steady state for a frozen duty vector: DGU voltages from the boost ratio,
/// junction voltages from junction KCL, line currents from Ohm's law, source
/// currents from DGU KCL.
/// Throws InfeasibleError for u* outside [0, 1) or a non-positive voltage and
/// SolverError for a singular or non-convergent junction subsystem.
[[nodiscard]] Equilibrium steady_state_closed_form(const Vector& u_star, const Network& net,
                                                   std::span<const JunctionDemand> demand = {},
                                                   const EquilibriumOptions& options = {});

struct NewtonOptions {
    double tol = 1e-12;  // on the storage-scaled residual (V, A)
    int max_iterations = 100;
    int max_halvings = 30;
    double feasibility_tol = 1e-9;
};

/// Newton iteration on the plant right-hand side with u frozen at `u_fixed`,
/// forward-difference Jacobian with step 1e-6 max(1, |x|). Independent of the
/// closed-form path.
[[nodiscard]] Equilibrium steady_state_newton(const SystemState& guess, const Network& net,
                                              const Vector& u_fixed,
                                              std::span<const JunctionDemand> demand = {},
                                              const NewtonOptions& options = {});

/// |1^T ((1 - u) o I_s) - 1^T I_l(V)| where I_l includes junction demand.
[[nodiscard]] double verify_current_balance(const Equilibrium& eq, const Network& net,
                                            std::span<const JunctionDemand> demand = {});

/// Storage-scaled max-norm residual of the plant at `state`.
[[nodiscard]] double plant_residual(const SystemState& state, const Network& net,
                                    std::span<const JunctionDemand> demand = {});

}  // namespace dcmg
