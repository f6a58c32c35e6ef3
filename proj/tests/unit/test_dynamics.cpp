#include "dcmg/dynamics.hpp"
#include "dcmg/equilibrium.hpp"
#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

using namespace dcmg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Plant equations written edge by edge, without the incidence matrix.
Vector reference_rhs(const SystemState& s, const Network& net, const std::vector<JunctionDemand>& demand) {
    Vector dx = Vector::Zero(s.flat().size());
    const auto L = s.layout();
    Vector node_current = Vector::Zero(static_cast<Eigen::Index>(net.n_nodes()));
    // Positive current flows from the negative end into the positive end.
    for (std::size_t k = 0; k < net.n_lines(); ++k) {
        const auto& e = net.topology().edges()[k];
        const double I = s.I()[static_cast<Eigen::Index>(k)];
        const double Vp = s.V()[static_cast<Eigen::Index>(e.positive_end)];
        const double Vn = s.V()[static_cast<Eigen::Index>(e.negative_end)];
        dx[L.off_I() + static_cast<Eigen::Index>(k)] = (Vn - Vp - net.lines()[k].R * I) / net.lines()[k].L;
        node_current[static_cast<Eigen::Index>(e.positive_end)] += I;
        node_current[static_cast<Eigen::Index>(e.negative_end)] -= I;
    }
    std::size_t j = 0;
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        const auto& node = net.nodes()[i];
        const double V = s.V()[static_cast<Eigen::Index>(i)];
        double inflow = node_current[static_cast<Eigen::Index>(i)];
        inflow -= node.zip.G * V + node.zip.I + node.zip.P / V;
        if (!demand.empty()) {
            inflow -= demand[i].I + demand[i].P / V;
        }
        if (node.kind == NodeKind::Dgu) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double u = s.u()[jj];
            const double I_s = s.I_s()[jj];
            dx[jj] = (-(1.0 - u) * V + node.V_s_star) / node.L_s;
            inflow += (1.0 - u) * I_s;
            ++j;
        }
        dx[L.off_V() + static_cast<Eigen::Index>(i)] = inflow / node.C;
    }
    return dx;
}

}  // namespace

TEST_CASE("plant right-hand side matches the edge-by-edge equations") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const auto net = testing::random_network(rng);
        const auto s = testing::random_state(rng, net);
        std::vector<JunctionDemand> demand(net.n_nodes());
        for (std::size_t i = 0; i < net.n_nodes(); ++i) {
            if (net.nodes()[i].kind == NodeKind::Junction) {
                demand[i] = {testing::uniform(rng, -10, 10), testing::uniform(rng, -5e3, 5e3)};
            }
        }
        const auto d = plant_rhs(s, net, demand);
        const Vector expected = reference_rhs(s, net, demand);
        for (Eigen::Index i = 0; i < expected.size(); ++i) {
            CHECK_THAT(d.flat()[i], WithinAbs(expected[i], 1e-9 * (1.0 + std::abs(expected[i]))));
        }
        CHECK(d.du().isZero(0.0));
    }
}

TEST_CASE("hand-computed derivative on two DGUs") {
    const auto net = testing::two_dgu_network(0.1);
    const auto s = SystemState::from_parts(Vector::Constant(2, 10.0), (Vector(2) << 300.0, 290.0).finished(),
                                           Vector::Constant(1, 20.0), Vector::Constant(2, 0.2));
    const auto d = plant_rhs(s, net);
    CHECK_THAT(d.dI_s()[0], WithinRel((-0.8 * 300.0 + 250.0) / 1e-3, 1e-14));
    CHECK_THAT(d.dI_s()[1], WithinRel((-0.8 * 290.0 + 270.0) / 2e-3, 1e-14));
    CHECK_THAT(d.dV()[0], WithinRel((0.8 * 10.0 - 30.0 + 20.0) / 5e-3, 1e-14));
    CHECK_THAT(d.dV()[1], WithinRel((0.8 * 10.0 - 29.0 - 20.0) / 4e-3, 1e-14));
    CHECK_THAT(d.dI()[0], WithinRel((290.0 - 300.0 - 0.1 * 20.0) / 5e-4, 1e-14));

    const Vector v_c = (Vector(2) << 0.5, -0.25).finished();
    const auto full = state_derivative(s, net, v_c);
    CHECK(full.du() == v_c);
}

TEST_CASE("power balance: stored energy rate equals source power minus losses") {
    // With P = I = 0 loads the converter terms cancel in
    // d/dt (1/2 I_s' L_s I_s + 1/2 V' C V + 1/2 I' L I).
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto net = testing::random_network(rng);
        for (std::size_t i = 0; i < net.n_nodes(); ++i) {
            net = net.with_zip(i, {net.nodes()[i].zip.G, 0.0, 0.0});
        }
        const auto s = testing::random_state(rng, net);
        const auto d = plant_rhs(s, net);
        double dE = 0.0, supplied = 0.0, lost = 0.0;
        for (std::size_t j = 0; j < net.n_dgu(); ++j) {
            const auto& node = net.nodes()[net.dgu_nodes()[j]];
            const auto jj = static_cast<Eigen::Index>(j);
            dE += node.L_s * s.I_s()[jj] * d.dI_s()[jj];
            supplied += node.V_s_star * s.I_s()[jj];
        }
        for (std::size_t i = 0; i < net.n_nodes(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            dE += net.nodes()[i].C * s.V()[ii] * d.dV()[ii];
            lost += net.nodes()[i].zip.G * s.V()[ii] * s.V()[ii];
        }
        for (std::size_t k = 0; k < net.n_lines(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            dE += net.lines()[k].L * s.I()[kk] * d.dI()[kk];
            lost += net.lines()[k].R * s.I()[kk] * s.I()[kk];
        }
        CHECK_THAT(dE, WithinAbs(supplied - lost, 1e-9 * (std::abs(supplied) + lost)));
        // Sources removed: the passive network only dissipates.
        CHECK(dE - supplied <= 1e-9 * lost);
    }
}

TEST_CASE("voltages must stay positive") {
    const auto net = testing::two_dgu_network();
    auto s = SystemState::from_parts(Vector::Zero(2), (Vector(2) << 300.0, 0.0).finished(), Vector::Zero(1),
                                     Vector::Zero(2));
    CHECK_THROWS_AS(plant_rhs(s, net), DomainError);
    s.V()[1] = -5.0;
    CHECK_THROWS_AS(plant_rhs(s, net), DomainError);
    CHECK_THROWS_AS(zip_current(0.0, {}), DomainError);
}

TEST_CASE("junction demand folds into effective loads") {
    const auto net = rse_network();
    std::vector<JunctionDemand> demand(4);
    demand[0] = {3.0, 500.0};
    const auto loads = effective_loads(net, demand);
    CHECK(loads[0] == ZipLoad{0.0, 3.0, 500.0});
    CHECK(loads[1] == ZipLoad{});
    CHECK(effective_loads(net, {}) == net.zip_loads());

    demand[1] = {1.0, 0.0};
    CHECK_THROWS_AS(effective_loads(net, demand), ModelError);
    demand.resize(2);
    CHECK_THROWS_AS(effective_loads(net, demand), ModelError);
}

TEST_CASE("state layout and packing") {
    const auto net = rse_network();
    const auto L = StateLayout::of(net);
    CHECK(L.size() == 2 + 4 + 3 + 2);
    CHECK(L.off_V() == 2);
    CHECK(L.off_I() == 6);
    CHECK(L.off_u() == 9);
    const auto s = SystemState::from_parts((Vector(2) << 1, 2).finished(), (Vector(4) << 3, 4, 5, 6).finished(),
                                           (Vector(3) << 7, 8, 9).finished(), (Vector(2) << 10, 11).finished());
    for (Eigen::Index i = 0; i < 11; ++i) {
        CHECK(s.flat()[i] == static_cast<double>(i + 1));
    }
    CHECK_THROWS_AS(SystemState(L, Vector::Zero(5)), ModelError);
    CHECK(dgu_values(net, s.V()) == (Vector(2) << 4, 6).finished());
}

TEST_CASE("storage scaling multiplies each block by its element") {
    const auto net = testing::two_dgu_network();
    StateDerivative d(StateLayout::of(net));
    d.flat().setOnes();
    const Vector scaled = scale_by_storage(net, d);
    const Vector expected = (Vector(7) << 1e-3, 2e-3, 5e-3, 4e-3, 5e-4, 1.0, 1.0).finished();
    CHECK(scaled.isApprox(expected, 1e-15));
}

TEST_CASE("equilibrium is stationary") {
    const auto net = rse_network();
    const Vector u = Vector::Constant(2, 1.0 - 278.0 / 380.0);
    const auto eq = steady_state_closed_form(u, net);
    const auto d = plant_rhs(eq.as_state(), net);
    CHECK(scale_by_storage(net, d).lpNorm<Eigen::Infinity>() < 1e-9);
}
