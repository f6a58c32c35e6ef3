#include "dcmg/dynamics.hpp"

#include <cmath>
#include <string>

namespace dcmg {

detail::Packed::Packed(StateLayout layout, Vector flat) : layout_(layout), x_(std::move(flat)) {
    if (x_.size() != layout_.size()) {
        throw ModelError("state vector has size " + std::to_string(x_.size()) + ", layout expects " +
                         std::to_string(layout_.size()));
    }
}

SystemState SystemState::from_parts(const Vector& I_s, const Vector& V, const Vector& I, const Vector& u) {
    if (I_s.size() != u.size()) {
        throw ModelError("state: I_s and u must have one entry per DGU");
    }
    StateLayout layout{static_cast<std::size_t>(I_s.size()), static_cast<std::size_t>(V.size()),
                       static_cast<std::size_t>(I.size())};
    SystemState s(layout);
    s.I_s() = I_s;
    s.V() = V;
    s.I() = I;
    s.u() = u;
    return s;
}

double zip_current(double V, const ZipLoad& load) {
    if (!(V > 0.0)) {
        throw DomainError("zip_current: voltage " + std::to_string(V) + " V is not positive");
    }
    return load.G * V + load.I + load.P / V;
}

std::vector<ZipLoad> effective_loads(const Network& net, std::span<const JunctionDemand> demand) {
    auto loads = net.zip_loads();
    if (demand.empty()) {
        return loads;
    }
    if (demand.size() != net.n_nodes()) {
        throw ModelError("junction demand must have one entry per node");
    }
    for (std::size_t i = 0; i < loads.size(); ++i) {
        if (demand[i] != JunctionDemand{} && net.nodes()[i].kind != NodeKind::Junction) {
            throw ModelError("demand injected at non-junction node '" + net.nodes()[i].label + "'");
        }
        loads[i].I += demand[i].I;
        loads[i].P += demand[i].P;
    }
    return loads;
}

void plant_rhs_into(const SystemState& state, const Network& net, std::span<const ZipLoad> loads,
                    StateDerivative& out) {
    const auto layout = StateLayout::of(net);
    if (!(state.layout() == layout) || loads.size() != net.n_nodes()) {
        throw ModelError("plant_rhs: state/parameter shape mismatch");
    }
    if (!(out.layout() == layout)) {
        out = StateDerivative(layout);
    }

    const auto V = state.V();
    const auto I = state.I();
    const auto I_s = state.I_s();
    const auto u = state.u();
    auto dI_s = out.dI_s();
    auto dV = out.dV();
    auto dI = out.dI();

    const auto& nodes = net.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (!(V[ii] > 0.0)) {
            throw DomainError("voltage at node '" + nodes[i].label + "' left the domain V > 0 (" +
                              std::to_string(V[ii]) + " V)");
        }
        const auto& ld = loads[i];
        dV[ii] = -(ld.G * V[ii] + ld.I + ld.P / V[ii]);
    }

    const auto& dgu = net.dgu_nodes();
    for (std::size_t j = 0; j < dgu.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const auto node = static_cast<Eigen::Index>(dgu[j]);
        const auto& spec = nodes[dgu[j]];
        const double one_minus_u = 1.0 - u[jj];
        dI_s[jj] = (-one_minus_u * V[node] + spec.V_s_star) / spec.L_s;
        dV[node] += one_minus_u * I_s[jj];
    }

    const auto& edges = net.topology().edges();
    const auto& lines = net.lines();
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const auto p = static_cast<Eigen::Index>(edges[k].positive_end);
        const auto q = static_cast<Eigen::Index>(edges[k].negative_end);
        // (D I)_p += I_k, (D I)_q -= I_k; (D^T V)_k = V_p - V_q
        dV[p] += I[kk];
        dV[q] -= I[kk];
        dI[kk] = (-(V[p] - V[q]) - lines[k].R * I[kk]) / lines[k].L;
    }

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        dV[static_cast<Eigen::Index>(i)] /= nodes[i].C;
    }
    out.du().setZero();
}

StateDerivative plant_rhs(const SystemState& state, const Network& net,
                          std::span<const JunctionDemand> demand) {
    const auto loads = effective_loads(net, demand);
    StateDerivative out(StateLayout::of(net));
    plant_rhs_into(state, net, loads, out);
    return out;
}

StateDerivative state_derivative(const SystemState& state, const Network& net, const Vector& v_c,
                                 std::span<const JunctionDemand> demand) {
    if (v_c.size() != static_cast<Eigen::Index>(net.n_dgu())) {
        throw ModelError("state_derivative: controller output must have one entry per DGU");
    }
    auto out = plant_rhs(state, net, demand);
    out.du() = v_c;
    return out;
}

Vector dgu_values(const Network& net, const Eigen::Ref<const Vector>& node_values) {
    Vector out(static_cast<Eigen::Index>(net.n_dgu()));
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        out[static_cast<Eigen::Index>(j)] = node_values[static_cast<Eigen::Index>(net.dgu_nodes()[j])];
    }
    return out;
}

Vector scale_by_storage(const Network& net, const StateDerivative& deriv) {
    Vector out = deriv.flat();
    const auto& layout = deriv.layout();
    for (std::size_t j = 0; j < layout.n_dgu; ++j) {
        out[static_cast<Eigen::Index>(j)] *= net.nodes()[net.dgu_nodes()[j]].L_s;
    }
    for (std::size_t i = 0; i < layout.n_nodes; ++i) {
        out[layout.off_V() + static_cast<Eigen::Index>(i)] *= net.nodes()[i].C;
    }
    for (std::size_t k = 0; k < layout.n_lines; ++k) {
        out[layout.off_I() + static_cast<Eigen::Index>(k)] *= net.lines()[k].L;
    }
    return out;
}

}  // namespace dcmg
