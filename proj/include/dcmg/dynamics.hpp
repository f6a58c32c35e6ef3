#pragma once

// Averaged boost-converter microgrid dynamics
//
//   L_s dI_s/dt = -(1 - u) o V_dgu + V_s*
//   C   dV/dt   =  (1 - u) o I_s - I_l(V) - d(V) + D I
//   L   dI/dt   = -D^T V - R I
//
// with the (1 - u) o I_s injection only at DGU nodes and the junction
// demand d(V) = I_d + P_d / V only at junction nodes.

#include "dcmg/net_model.hpp"

#include <span>
#include <vector>

namespace dcmg {

/// Sizes of the flat state (I_s, V, I, u).
struct StateLayout {
    std::size_t n_dgu = 0;
    std::size_t n_nodes = 0;
    std::size_t n_lines = 0;

    static StateLayout of(const Network& net) { return {net.n_dgu(), net.n_nodes(), net.n_lines()}; }

    [[nodiscard]] Eigen::Index size() const {
        return static_cast<Eigen::Index>(2 * n_dgu + n_nodes + n_lines);
    }
    [[nodiscard]] Eigen::Index off_V() const { return static_cast<Eigen::Index>(n_dgu); }
    [[nodiscard]] Eigen::Index off_I() const { return static_cast<Eigen::Index>(n_dgu + n_nodes); }
    [[nodiscard]] Eigen::Index off_u() const { return static_cast<Eigen::Index>(n_dgu + n_nodes + n_lines); }

    bool operator==(const StateLayout&) const = default;
};

namespace detail {

/// Flat vector partitioned as (I_s | V | I | u).
class Packed {
public:
    Packed() = default;
    explicit Packed(StateLayout layout) : layout_(layout), x_(Vector::Zero(layout.size())) {}
    Packed(StateLayout layout, Vector flat);

    [[nodiscard]] const StateLayout& layout() const { return layout_; }
    [[nodiscard]] const Vector& flat() const { return x_; }
    [[nodiscard]] Vector& flat() { return x_; }

protected:
    auto seg0() { return x_.segment(0, static_cast<Eigen::Index>(layout_.n_dgu)); }
    auto seg1() { return x_.segment(layout_.off_V(), static_cast<Eigen::Index>(layout_.n_nodes)); }
    auto seg2() { return x_.segment(layout_.off_I(), static_cast<Eigen::Index>(layout_.n_lines)); }
    auto seg3() { return x_.segment(layout_.off_u(), static_cast<Eigen::Index>(layout_.n_dgu)); }
    [[nodiscard]] auto seg0() const { return x_.segment(0, static_cast<Eigen::Index>(layout_.n_dgu)); }
    [[nodiscard]] auto seg1() const { return x_.segment(layout_.off_V(), static_cast<Eigen::Index>(layout_.n_nodes)); }
    [[nodiscard]] auto seg2() const { return x_.segment(layout_.off_I(), static_cast<Eigen::Index>(layout_.n_lines)); }
    [[nodiscard]] auto seg3() const { return x_.segment(layout_.off_u(), static_cast<Eigen::Index>(layout_.n_dgu)); }

    StateLayout layout_{};
    Vector x_;
};

}  // namespace detail

class SystemState : public detail::Packed {
public:
    using Packed::Packed;

    static SystemState from_parts(const Vector& I_s, const Vector& V, const Vector& I, const Vector& u);

    auto I_s() { return seg0(); }
    auto V() { return seg1(); }
    auto I() { return seg2(); }
    auto u() { return seg3(); }
    [[nodiscard]] auto I_s() const { return seg0(); }
    [[nodiscard]] auto V() const { return seg1(); }
    [[nodiscard]] auto I() const { return seg2(); }
    [[nodiscard]] auto u() const { return seg3(); }
};

class StateDerivative : public detail::Packed {
public:
    using Packed::Packed;

    auto dI_s() { return seg0(); }
    auto dV() { return seg1(); }
    auto dI() { return seg2(); }
    auto du() { return seg3(); }
    [[nodiscard]] auto dI_s() const { return seg0(); }
    [[nodiscard]] auto dV() const { return seg1(); }
    [[nodiscard]] auto dI() const { return seg2(); }
    [[nodiscard]] auto du() const { return seg3(); }
};

/// External demand at a junction node, passive sign convention: positive
/// values absorb (load), negative values inject (generator).
struct JunctionDemand {
    double I = 0.0;  // A
    double P = 0.0;  // W, drawn as P / V

    bool operator==(const JunctionDemand&) const = default;
};

/// G V + I + P / V.
[[nodiscard]] double zip_current(double V, const ZipLoad& load);

/// ZIP loads with the junction demand folded in (I_d into I, P_d into P).
/// `demand` may be empty (no demand) or hold one entry per node.
[[nodiscard]] std::vector<ZipLoad> effective_loads(const Network& net,
                                                   std::span<const JunctionDemand> demand);

/// Plant right-hand side with du left at zero. `loads` are the effective
/// per-node loads (see effective_loads). Allocation-free.
void plant_rhs_into(const SystemState& state, const Network& net, std::span<const ZipLoad> loads,
                    StateDerivative& out);

[[nodiscard]] StateDerivative plant_rhs(const SystemState& state, const Network& net,
                                        std::span<const JunctionDemand> demand = {});

/// Plant right-hand side with du = v_c.
[[nodiscard]] StateDerivative state_derivative(const SystemState& state, const Network& net,
                                               const Vector& v_c,
                                               std::span<const JunctionDemand> demand = {});

/// Node voltages at the DGU nodes, in DGU order.
[[nodiscard]] Vector dgu_values(const Network& net, const Eigen::Ref<const Vector>& node_values);

/// Multiplies each block of a derivative by its storage element
/// (L_s, C, L; du unchanged), i.e. maps rates to voltage/current mismatches.
[[nodiscard]] Vector scale_by_storage(const Network& net, const StateDerivative& deriv);

}  // namespace dcmg
