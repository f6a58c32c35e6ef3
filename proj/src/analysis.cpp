#include "dcmg/analysis.hpp"

#include <cmath>

namespace dcmg {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void require_shapes(const StateDerivative& deriv, const Network& net) {
    if (!(deriv.layout() == StateLayout::of(net))) {
        throw ModelError("analysis: derivative shape does not match the network");
    }
}

}  // namespace

double storage_S(const StateDerivative& deriv, const Network& net) {
    require_shapes(deriv, net);
    double s = 0.0;
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        const double x = deriv.dI_s()[idx(j)];
        s += net.nodes()[net.dgu_nodes()[j]].L_s * x * x;
    }
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        const double x = deriv.dV()[idx(i)];
        s += net.nodes()[i].C * x * x;
    }
    for (std::size_t k = 0; k < net.n_lines(); ++k) {
        const double x = deriv.dI()[idx(k)];
        s += net.lines()[k].L * x * x;
    }
    return 0.5 * s;
}

double storage_Sd(const StateDerivative& deriv, const Vector& u, const Vector& u_star,
                  const ControllerConfig& cfg, const Network& net) {
    const Vector e = u - u_star;
    return storage_S(deriv, net) + 0.5 * e.dot(cfg.K_c.cwiseProduct(e));
}

double supply_rate(const StateDerivative& deriv, const Vector& v_c, const SystemState& state, const Network& net) {
    double w = 0.0;
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        const auto node = idx(net.dgu_nodes()[j]);
        const auto jj = idx(j);
        w += v_c[jj] * (deriv.dI_s()[jj] * state.V()[node] - deriv.dV()[node] * state.I_s()[jj]);
    }
    return w;
}

double dissipation_rate(const StateDerivative& deriv, const Vector& v_c, const SystemState& state,
                        const Network& net, const ControllerConfig& cfg, std::span<const ZipLoad> loads) {
    require_shapes(deriv, net);
    const Vector g = incremental_conductance(as_span(state.V()), loads);
    double rate = 0.0;
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        const double x = deriv.dV()[idx(i)];
        rate -= g[idx(i)] * x * x;
    }
    for (std::size_t k = 0; k < net.n_lines(); ++k) {
        const double x = deriv.dI()[idx(k)];
        rate -= net.lines()[k].R * x * x;
    }
    for (Eigen::Index j = 0; j < v_c.size(); ++j) {
        rate -= cfg.T_c[j] * v_c[j] * v_c[j];
    }
    return rate;
}

StateDerivative second_derivative(const SystemState& state, const StateDerivative& deriv, const Vector& v_c,
                                  const Network& net, std::span<const ZipLoad> loads) {
    require_shapes(deriv, net);
    const auto& nodes = net.nodes();
    const auto V = state.V();
    const auto dV = deriv.dV();
    const auto dI = deriv.dI();
    StateDerivative dd(deriv.layout());

    const Vector g = incremental_conductance(as_span(V), loads);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        dd.dV()[idx(i)] = -g[idx(i)] * dV[idx(i)];
    }
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        const auto jj = idx(j);
        const auto node = idx(net.dgu_nodes()[j]);
        const double one_minus_u = 1.0 - state.u()[jj];
        dd.dI_s()[jj] = (-one_minus_u * dV[node] + v_c[jj] * V[node]) / nodes[net.dgu_nodes()[j]].L_s;
        dd.dV()[node] += one_minus_u * deriv.dI_s()[jj] - v_c[jj] * state.I_s()[jj];
    }
    const auto& edges = net.topology().edges();
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto kk = idx(k);
        const auto p = idx(edges[k].positive_end);
        const auto q = idx(edges[k].negative_end);
        dd.dV()[p] += dI[kk];
        dd.dV()[q] -= dI[kk];
        dd.dI()[kk] = (-(dV[p] - dV[q]) - net.lines()[k].R * dI[kk]) / net.lines()[k].L;
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        dd.dV()[idx(i)] /= nodes[i].C;
    }
    return dd;
}

double storage_rate(const SystemState& state, const StateDerivative& deriv, const Vector& v_c,
                    const Network& net, std::span<const ZipLoad> loads) {
    const auto dd = second_derivative(state, deriv, v_c, net, loads);
    double rate = 0.0;
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        rate += net.nodes()[net.dgu_nodes()[j]].L_s * deriv.dI_s()[idx(j)] * dd.dI_s()[idx(j)];
    }
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        rate += net.nodes()[i].C * deriv.dV()[idx(i)] * dd.dV()[idx(i)];
    }
    for (std::size_t k = 0; k < net.n_lines(); ++k) {
        rate += net.lines()[k].L * deriv.dI()[idx(k)] * dd.dI()[idx(k)];
    }
    return rate;
}

PassivityCheck passivity_check(const StateDerivative& deriv, const Vector& v_c, const SystemState& state,
                               const Network& net, std::span<const ZipLoad> loads, double tolerance) {
    const double w = supply_rate(deriv, v_c, state, net);
    const double s_dot = storage_rate(state, deriv, v_c, net, loads);

    // Magnitude of the individual power terms, so the tolerance is relative.
    const Vector g = incremental_conductance(as_span(state.V()), loads);
    double scale = std::abs(w) + std::abs(s_dot);
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        scale += std::abs(g[idx(i)]) * deriv.dV()[idx(i)] * deriv.dV()[idx(i)];
    }
    for (std::size_t k = 0; k < net.n_lines(); ++k) {
        scale += net.lines()[k].R * deriv.dI()[idx(k)] * deriv.dI()[idx(k)];
    }

    PassivityCheck out;
    out.margin = w - s_dot;
    out.scale = scale;
    out.violated = out.margin < -tolerance * scale;
    return out;
}

}  // namespace dcmg
