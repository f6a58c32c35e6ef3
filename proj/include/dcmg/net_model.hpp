#pragma once

// =============================================================================
// Microgrid description: graph, per-node converter/filter parameters, lines
// and ZIP loads. Everything here is immutable after construction.
// =============================================================================

#include "dcmg/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcmg {

using Vector = Eigen::VectorXd;
using IncidenceMatrix = Eigen::MatrixXi;

inline constexpr double kDefaultJunctionCapacitance = 1e-3;  // F

enum class NodeKind { Dgu, Junction };

/// Parallel constant-impedance / constant-current / constant-power load.
/// Positive values absorb power (passive sign convention).
struct ZipLoad {
    double G = 0.0;  // S
    double I = 0.0;  // A
    double P = 0.0;  // W

    bool operator==(const ZipLoad&) const = default;
};

struct NodeSpec {
    std::string label;
    NodeKind kind = NodeKind::Junction;
    double L_s = 0.0;       // H, DGU only
    double C = 0.0;         // F
    double V_s_star = 0.0;  // V, DGU only
    ZipLoad zip;

    bool operator==(const NodeSpec&) const = default;
};

struct LineSpec {
    std::string label;
    double R = 0.0;  // ohm
    double L = 0.0;  // H

    bool operator==(const LineSpec&) const = default;
};

struct Edge {
    std::size_t positive_end = 0;
    std::size_t negative_end = 0;

    bool operator==(const Edge&) const = default;
};

/// Connected undirected graph with an orientation per edge. A positive
/// current on edge k flows from its `negative_end` into its `positive_end`
/// (L dI/dt = -D'V - R I).
class Topology {
public:
    Topology(std::size_t n_nodes, std::vector<Edge> edges);

    [[nodiscard]] std::size_t n_nodes() const { return n_nodes_; }
    [[nodiscard]] std::size_t n_edges() const { return edges_.size(); }
    [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }

    bool operator==(const Topology&) const = default;

private:
    std::size_t n_nodes_;
    std::vector<Edge> edges_;
};

/// D_ik = +1 if node i is the positive end of edge k, -1 if the negative
/// end, 0 otherwise.
[[nodiscard]] IncidenceMatrix build_incidence(const Topology& topology);

struct NetworkOptions {
    /// Accept ZIP loads with P < 0 (net-generating constant power).
    bool allow_negative_power = false;

    bool operator==(const NetworkOptions&) const = default;
};

class Network {
public:
    Network(Topology topology, std::vector<NodeSpec> nodes, std::vector<LineSpec> lines,
            NetworkOptions options = {});

    [[nodiscard]] const Topology& topology() const { return topology_; }
    [[nodiscard]] const std::vector<NodeSpec>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<LineSpec>& lines() const { return lines_; }
    [[nodiscard]] const NetworkOptions& options() const { return options_; }
    [[nodiscard]] const IncidenceMatrix& incidence() const { return incidence_; }

    [[nodiscard]] std::size_t n_nodes() const { return nodes_.size(); }
    [[nodiscard]] std::size_t n_lines() const { return lines_.size(); }
    [[nodiscard]] std::size_t n_dgu() const { return dgu_nodes_.size(); }

    /// Node index of every DGU, in ascending node order.
    [[nodiscard]] const std::vector<std::size_t>& dgu_nodes() const { return dgu_nodes_; }
    [[nodiscard]] std::optional<std::size_t> dgu_index(std::size_t node) const;

    [[nodiscard]] std::optional<std::size_t> find_node(const std::string& label) const;
    [[nodiscard]] std::optional<std::size_t> find_line(const std::string& label) const;

    [[nodiscard]] std::vector<ZipLoad> zip_loads() const;

    /// Copy with the ZIP load of one node replaced.
    [[nodiscard]] Network with_zip(std::size_t node, const ZipLoad& load) const;

    bool operator==(const Network& other) const {
        return topology_ == other.topology_ && nodes_ == other.nodes_ &&
               lines_ == other.lines_ && options_ == other.options_;
    }

private:
    Topology topology_;
    std::vector<NodeSpec> nodes_;
    std::vector<LineSpec> lines_;
    NetworkOptions options_;
    IncidenceMatrix incidence_;
    std::vector<std::size_t> dgu_nodes_;
    std::vector<std::ptrdiff_t> dgu_slot_;
};

void validate_zip_load(const ZipLoad& load, const std::string& where, bool allow_negative_power);

/// Incremental conductance G_i - P_i / V_i^2 of every node.
[[nodiscard]] Vector incremental_conductance(std::span<const double> V,
                                             std::span<const ZipLoad> loads);

/// Membership of V in the region where the load incremental conductance
/// matrix is positive definite. A node without constant-power demand
/// (P <= 0) only needs G >= 0.
[[nodiscard]] bool check_zip_region(std::span<const double> V, std::span<const ZipLoad> loads);

/// True iff V_d_i > sqrt(P_i / G_i) at every node with P_i > 0.
/// Throws InfeasibleError for P_i > 0 with G_i = 0.
[[nodiscard]] bool check_voltage_power_condition(std::span<const double> V_d_star,
                                          std::span<const ZipLoad> loads);

inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace dcmg
