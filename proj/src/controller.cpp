#include "dcmg/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcmg {

ControllerConfig ControllerConfig::uniform(const Network& net, double T_c, double K_c, double V_d_star) {
    const auto n = static_cast<Eigen::Index>(net.n_dgu());
    ControllerConfig cfg;
    cfg.T_c = Vector::Constant(n, T_c);
    cfg.K_c = Vector::Constant(n, K_c);
    cfg.V_d_star = Vector::Constant(n, V_d_star);
    return cfg;
}

void ControllerConfig::validate(const Network& net) const {
    const auto n = static_cast<Eigen::Index>(net.n_dgu());
    if (T_c.size() != n || K_c.size() != n || V_d_star.size() != n) {
        throw ModelError("controller: gains and references need one entry per DGU");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& label = net.nodes()[net.dgu_nodes()[static_cast<std::size_t>(j)]].label;
        if (!(std::isfinite(T_c[j]) && T_c[j] > 0.0) || !(std::isfinite(K_c[j]) && K_c[j] > 0.0)) {
            throw ModelError("controller at node '" + label + "': T_c and K_c must be > 0");
        }
    }
    if (!(u_min >= 0.0 && u_min < u_max && u_max < 1.0)) {
        throw ModelError("controller: duty bounds must satisfy 0 <= u_min < u_max < 1");
    }
    if (decimation == 0) {
        throw ModelError("controller: decimation must be >= 1");
    }
    if (!(levant_bound_current > 0.0) || !(levant_bound_voltage > 0.0)) {
        throw ModelError("controller: differentiator bounds must be > 0");
    }
    const Vector V_s = source_voltages(net);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (V_d_star[j] < V_s[j]) {
            std::ostringstream msg;
            msg << "reference " << V_d_star[j] << " V at node '"
                << net.nodes()[net.dgu_nodes()[static_cast<std::size_t>(j)]].label
                << "' is below its source voltage " << V_s[j] << " V";
            throw InfeasibleError(msg.str());
        }
    }
    const Vector u_star = duty_reference(V_s, V_d_star);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (u_star[j] < u_min || u_star[j] > u_max) {
            throw InfeasibleError("controller: duty reference outside the saturation bounds at node '" +
                                  net.nodes()[net.dgu_nodes()[static_cast<std::size_t>(j)]].label + "'");
        }
    }
}

Vector duty_reference(const Vector& V_s_star, const Vector& V_d_star) {
    if (V_s_star.size() != V_d_star.size()) {
        throw ModelError("duty_reference: size mismatch");
    }
    Vector u(V_s_star.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (!(V_s_star[i] > 0.0)) {
            throw ModelError("duty_reference: source voltage must be positive");
        }
        if (V_d_star[i] < V_s_star[i]) {
            std::ostringstream msg;
            msg << "duty_reference: desired voltage " << V_d_star[i] << " V below source voltage "
                << V_s_star[i] << " V at index " << i;
            throw InfeasibleError(msg.str());
        }
        u[i] = 1.0 - V_s_star[i] / V_d_star[i];
    }
    return u;
}

Vector source_voltages(const Network& net) {
    Vector V_s(static_cast<Eigen::Index>(net.n_dgu()));
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        V_s[static_cast<Eigen::Index>(j)] = net.nodes()[net.dgu_nodes()[j]].V_s_star;
    }
    return V_s;
}

Vector control_law(const Vector& u, const Vector& u_star, const Vector& dI_s, const Vector& dV,
                   const Vector& I_s, const Vector& V, const ControllerConfig& cfg) {
    const auto n = u.size();
    if (u_star.size() != n || dI_s.size() != n || dV.size() != n || I_s.size() != n || V.size() != n ||
        cfg.T_c.size() != n || cfg.K_c.size() != n) {
        throw ModelError("control_law: size mismatch");
    }
    Vector v_c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v_c[i] = control_law_node(u[i], u_star[i], dI_s[i], dV[i], I_s[i], V[i], cfg.T_c[i], cfg.K_c[i]);
    }
    return v_c;
}

SaturatedDuty saturate_duty(const Vector& u, double u_min, double u_max) {
    SaturatedDuty out{u, std::vector<bool>(static_cast<std::size_t>(u.size()), false)};
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u[i] < u_min) {
            out.u[i] = u_min;
            out.saturated[static_cast<std::size_t>(i)] = true;
        } else if (u[i] > u_max) {
            out.u[i] = u_max;
            out.saturated[static_cast<std::size_t>(i)] = true;
        }
    }
    return out;
}

LevantState LevantState::for_bound(double second_derivative_bound) {
    if (!(second_derivative_bound > 0.0)) {
        throw ModelError("levant: second-derivative bound must be > 0");
    }
    LevantState s;
    s.lambda0 = 6.0 * std::sqrt(second_derivative_bound);
    s.lambda1 = 4.0 * second_derivative_bound;
    return s;
}

std::pair<LevantState, double> levant_step(const LevantState& state, double sample, double dt) {
    if (!(dt > 0.0)) {
        throw ModelError("levant_step: dt must be > 0");
    }
    const double e = state.z0 - sample;
    const double sgn = (e > 0.0) - (e < 0.0);
    LevantState next = state;
    next.z0 += dt * (-state.lambda0 * std::sqrt(std::abs(e)) * sgn + state.z1);
    next.z1 += dt * (-state.lambda1 * sgn);
    return {next, next.z1};
}

}  // namespace dcmg
