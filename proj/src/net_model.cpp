#include "dcmg/net_model.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

namespace dcmg {

namespace {

bool finite(double x) { return std::isfinite(x); }

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw ModelError(message);
    }
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

Topology::Topology(std::size_t n_nodes, std::vector<Edge> edges)
    : n_nodes_(n_nodes), edges_(std::move(edges)) {
    require(n_nodes_ > 0, "topology: at least one node required");

    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<std::size_t> parent(n_nodes_);
    std::iota(parent.begin(), parent.end(), std::size_t{0});

    for (std::size_t k = 0; k < edges_.size(); ++k) {
        const auto& e = edges_[k];
        require(e.positive_end < n_nodes_ && e.negative_end < n_nodes_,
                "topology: edge " + std::to_string(k) + " references a node id outside [0, " +
                    std::to_string(n_nodes_) + ")");
        require(e.positive_end != e.negative_end,
                "topology: edge " + std::to_string(k) + " is a self-loop");
        auto key = std::minmax(e.positive_end, e.negative_end);
        require(seen.insert(key).second, "topology: duplicate edge between nodes " +
                                             std::to_string(key.first) + " and " +
                                             std::to_string(key.second));
        parent[find_root(parent, e.positive_end)] = find_root(parent, e.negative_end);
    }

    const auto root = find_root(parent, 0);
    for (std::size_t i = 1; i < n_nodes_; ++i) {
        require(find_root(parent, i) == root,
                "topology: graph is disconnected (node " + std::to_string(i) +
                    " unreachable from node 0)");
    }
}

IncidenceMatrix build_incidence(const Topology& topology) {
    IncidenceMatrix D = IncidenceMatrix::Zero(static_cast<Eigen::Index>(topology.n_nodes()),
                                              static_cast<Eigen::Index>(topology.n_edges()));
    for (std::size_t k = 0; k < topology.n_edges(); ++k) {
        const auto& e = topology.edges()[k];
        D(static_cast<Eigen::Index>(e.positive_end), static_cast<Eigen::Index>(k)) = 1;
        D(static_cast<Eigen::Index>(e.negative_end), static_cast<Eigen::Index>(k)) = -1;
    }
    return D;
}

void validate_zip_load(const ZipLoad& load, const std::string& where, bool allow_negative_power) {
    require(finite(load.G) && finite(load.I) && finite(load.P), where + ": non-finite ZIP load");
    require(load.G >= 0.0, where + ": ZIP conductance G must be >= 0");
    require(allow_negative_power || load.P >= 0.0,
            where + ": negative constant-power load requires allow_negative_power");
}

Network::Network(Topology topology, std::vector<NodeSpec> nodes, std::vector<LineSpec> lines,
                 NetworkOptions options)
    : topology_(std::move(topology)),
      nodes_(std::move(nodes)),
      lines_(std::move(lines)),
      options_(options),
      incidence_(build_incidence(topology_)) {
    require(nodes_.size() == topology_.n_nodes(), "network: node spec count does not match topology");
    require(lines_.size() == topology_.n_edges(), "network: line spec count does not match topology");

    std::set<std::string> labels;
    dgu_slot_.assign(nodes_.size(), -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& node = nodes_[i];
        const std::string where = "node '" + node.label + "'";
        require(!node.label.empty(), "network: node " + std::to_string(i) + " has an empty label");
        require(labels.insert(node.label).second, "network: duplicate node label '" + node.label + "'");
        require(finite(node.C) && node.C > 0.0, where + ": capacitance must be > 0");
        if (node.kind == NodeKind::Dgu) {
            require(finite(node.L_s) && node.L_s > 0.0, where + ": L_s must be > 0");
            require(finite(node.V_s_star) && node.V_s_star > 0.0, where + ": V_s_star must be > 0");
            dgu_slot_[i] = static_cast<std::ptrdiff_t>(dgu_nodes_.size());
            dgu_nodes_.push_back(i);
        } else {
            require(node.L_s == 0.0 && node.V_s_star == 0.0,
                    where + ": junction nodes carry no source inductance or source voltage");
        }
        validate_zip_load(node.zip, where, options_.allow_negative_power);
    }
    require(!dgu_nodes_.empty(), "network: at least one DGU node required");

    std::set<std::string> line_labels;
    for (const auto& line : lines_) {
        const std::string where = "line '" + line.label + "'";
        require(!line.label.empty(), "network: line with empty label");
        require(line_labels.insert(line.label).second, "network: duplicate line label '" + line.label + "'");
        require(finite(line.R) && line.R > 0.0, where + ": resistance must be > 0");
        require(finite(line.L) && line.L > 0.0, where + ": inductance must be > 0");
    }
}

std::optional<std::size_t> Network::dgu_index(std::size_t node) const {
    if (node >= dgu_slot_.size() || dgu_slot_[node] < 0) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(dgu_slot_[node]);
}

std::optional<std::size_t> Network::find_node(const std::string& label) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].label == label) {
            return i;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> Network::find_line(const std::string& label) const {
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        if (lines_[k].label == label) {
            return k;
        }
    }
    return std::nullopt;
}

std::vector<ZipLoad> Network::zip_loads() const {
    std::vector<ZipLoad> loads;
    loads.reserve(nodes_.size());
    for (const auto& node : nodes_) {
        loads.push_back(node.zip);
    }
    return loads;
}

Network Network::with_zip(std::size_t node, const ZipLoad& load) const {
    require(node < nodes_.size(), "network: node index out of range");
    auto nodes = nodes_;
    nodes[node].zip = load;
    return Network(topology_, std::move(nodes), lines_, options_);
}

Vector incremental_conductance(std::span<const double> V, std::span<const ZipLoad> loads) {
    require(V.size() == loads.size(), "incremental_conductance: size mismatch");
    Vector g(static_cast<Eigen::Index>(V.size()));
    for (std::size_t i = 0; i < V.size(); ++i) {
        if (!(V[i] > 0.0)) {
            throw DomainError("voltage at node " + std::to_string(i) + " is not positive");
        }
        g[static_cast<Eigen::Index>(i)] = loads[i].G - loads[i].P / (V[i] * V[i]);
    }
    return g;
}

bool check_zip_region(std::span<const double> V, std::span<const ZipLoad> loads) {
    const Vector g = incremental_conductance(V, loads);
    for (std::size_t i = 0; i < V.size(); ++i) {
        const bool ok = loads[i].P > 0.0 ? g[static_cast<Eigen::Index>(i)] > 0.0 : loads[i].G >= 0.0;
        if (!ok) {
            return false;
        }
    }
    return true;
}

bool check_voltage_power_condition(std::span<const double> V_d_star, std::span<const ZipLoad> loads) {
    require(V_d_star.size() == loads.size(), "check_voltage_power_condition: size mismatch");
    bool ok = true;
    for (std::size_t i = 0; i < loads.size(); ++i) {
        require(V_d_star[i] > 0.0, "check_voltage_power_condition: reference voltage must be positive");
        if (loads[i].P <= 0.0) {
            continue;
        }
        if (loads[i].G <= 0.0) {
            std::ostringstream msg;
            msg << "constant-power load " << loads[i].P << " W at index " << i
                << " has no conductance; no reference voltage satisfies V_d > sqrt(P/G)";
            throw InfeasibleError(msg.str());
        }
        if (!(V_d_star[i] > std::sqrt(loads[i].P / loads[i].G))) {
            ok = false;
        }
    }
    return ok;
}

}  // namespace dcmg
