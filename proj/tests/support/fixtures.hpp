#pragma once

// Deterministic random networks and states shared by the unit and
// acceptance tests.

#include "dcmg/controller.hpp"
#include "dcmg/dynamics.hpp"
#include "dcmg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dcmg::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Node voltages of random states are drawn from this band.
inline constexpr double kVmin = 300.0;
inline constexpr double kVmax = 450.0;

/// Connected network with 2..max_nodes nodes: a random spanning tree plus a
/// few extra edges, random orientation, at least one DGU. Constant-power
/// loads are kept small enough that every voltage in [kVmin, kVmax] lies in
/// the passivity region.
inline Network random_network(std::mt19937_64& rng, std::size_t max_nodes = 6) {
    const std::size_t n = pick(rng, 2, max_nodes);
    std::vector<Edge> edges;
    std::set<std::pair<std::size_t, std::size_t>> used;
    auto add = [&](std::size_t a, std::size_t b) {
        const auto key = std::minmax(a, b);
        if (a == b || !used.insert(key).second) {
            return;
        }
        if (pick(rng, 0, 1)) {
            std::swap(a, b);
        }
        edges.push_back({a, b});
    };
    for (std::size_t i = 1; i < n; ++i) {
        add(i, pick(rng, 0, i - 1));
    }
    const std::size_t extra = pick(rng, 0, n / 2);
    for (std::size_t e = 0; e < extra; ++e) {
        add(pick(rng, 0, n - 1), pick(rng, 0, n - 1));
    }

    std::vector<NodeSpec> nodes(n);
    const std::size_t forced_dgu = pick(rng, 0, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        auto& node = nodes[i];
        node.label = "n" + std::to_string(i);
        node.kind = (i == forced_dgu || pick(rng, 0, 1)) ? NodeKind::Dgu : NodeKind::Junction;
        node.C = uniform(rng, 2e-3, 1e-2);
        if (node.kind == NodeKind::Dgu) {
            node.L_s = uniform(rng, 5e-4, 3e-3);
            node.V_s_star = uniform(rng, 200.0, 300.0);
        }
        node.zip.G = uniform(rng, 0.01, 0.5);
        node.zip.I = uniform(rng, -5.0, 20.0);
        node.zip.P = uniform(rng, -2e3, 0.5 * node.zip.G * kVmin * kVmin);
    }
    std::vector<LineSpec> lines(edges.size());
    for (std::size_t k = 0; k < lines.size(); ++k) {
        lines[k] = {"l" + std::to_string(k), uniform(rng, 0.02, 0.3), uniform(rng, 2e-4, 2e-3)};
    }
    return Network(Topology(n, edges), nodes, lines, NetworkOptions{true});
}

inline ControllerConfig random_controller(std::mt19937_64& rng, const Network& net) {
    ControllerConfig cfg;
    const auto n_dgu = static_cast<Eigen::Index>(net.n_dgu());
    cfg.T_c.resize(n_dgu);
    cfg.K_c.resize(n_dgu);
    cfg.V_d_star.resize(n_dgu);
    for (Eigen::Index j = 0; j < n_dgu; ++j) {
        cfg.T_c[j] = log_uniform(rng, 1e6, 1e8);
        cfg.K_c[j] = log_uniform(rng, 1e8, 1e10);
        cfg.V_d_star[j] = uniform(rng, kVmin, kVmax);
    }
    return cfg;
}

inline SystemState random_state(std::mt19937_64& rng, const Network& net) {
    SystemState s(StateLayout::of(net));
    for (Eigen::Index j = 0; j < s.I_s().size(); ++j) {
        s.I_s()[j] = uniform(rng, -50.0, 150.0);
        s.u()[j] = uniform(rng, 0.05, 0.6);
    }
    for (Eigen::Index i = 0; i < s.V().size(); ++i) {
        s.V()[i] = uniform(rng, kVmin, kVmax);
    }
    for (Eigen::Index k = 0; k < s.I().size(); ++k) {
        s.I()[k] = uniform(rng, -80.0, 80.0);
    }
    return s;
}

/// Two DGUs joined by one line, no loads.
inline Network two_dgu_network(double G = 0.0) {
    std::vector<NodeSpec> nodes = {
        {"a", NodeKind::Dgu, 1e-3, 5e-3, 250.0, {G, 0.0, 0.0}},
        {"b", NodeKind::Dgu, 2e-3, 4e-3, 270.0, {G, 0.0, 0.0}},
    };
    return Network(Topology(2, {{0, 1}}), nodes, {{"ab", 0.1, 5e-4}});
}

}  // namespace dcmg::testing
