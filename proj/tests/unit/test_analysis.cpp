#include "dcmg/analysis.hpp"
#include "dcmg/sim_engine.hpp"
#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

using namespace dcmg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Setup {
    Network net;
    ControllerConfig cfg;
    std::vector<ZipLoad> loads;
    SystemState state;
};

Setup random_setup(std::mt19937_64& rng) {
    auto net = testing::random_network(rng);
    auto cfg = testing::random_controller(rng, net);
    auto loads = net.zip_loads();
    auto state = testing::random_state(rng, net);
    return {std::move(net), std::move(cfg), std::move(loads), std::move(state)};
}

/// Closed-loop state a signed time h away, by ten RK4 substeps.
Vector flow(ClosedLoop& f, const Vector& x, double h) {
    Vector y = x;
    Rk4Workspace ws;
    for (int i = 0; i < 10; ++i) {
        rk4_step_into(y, h / 10.0, f, ws);
    }
    return y;
}

}  // namespace

TEST_CASE("storage functions match their quadratic forms") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        auto s = random_setup(rng);
        StateDerivative d(StateLayout::of(s.net));
        for (Eigen::Index i = 0; i < d.flat().size(); ++i) {
            d.flat()[i] = testing::uniform(rng, -100, 100);
        }
        const Vector w = scale_by_storage(s.net, d);
        // 1/2 x' M x = 1/2 (M x)' x with M diagonal, du block excluded.
        const Eigen::Index n = s.state.layout().off_u();
        const double S = 0.5 * w.head(n).dot(d.flat().head(n));
        CHECK_THAT(storage_S(d, s.net), WithinRel(S, 1e-13));

        const Vector u_star = s.state.u() * 0.9;
        const Vector e = s.state.u() - u_star;
        const double Sd = S + 0.5 * (e.array().square() * s.cfg.K_c.array()).sum();
        CHECK_THAT(storage_Sd(d, s.state.u(), u_star, s.cfg, s.net), WithinRel(Sd, 1e-13));
    }
}

TEST_CASE("second derivatives match finite differences of the first") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        auto s = random_setup(rng);
        ClosedLoop f(s.net, s.cfg, s.loads);
        Vector v_c;
        const auto d = f.derivative(s.state, &v_c);
        const auto dd = second_derivative(s.state, d, v_c, s.net, s.loads);

        const double h = 1e-6;
        const SystemState plus(s.state.layout(), flow(f, s.state.flat(), h));
        const SystemState minus(s.state.layout(), flow(f, s.state.flat(), -h));
        const Vector fd = (f.derivative(plus).flat() - f.derivative(minus).flat()) / (2 * h);
        const Eigen::Index n = s.state.layout().off_u();
        const double scale = fd.head(n).lpNorm<Eigen::Infinity>();
        CHECK((dd.flat().head(n) - fd.head(n)).lpNorm<Eigen::Infinity>() < 1e-4 * scale);
    }
}

TEST_CASE("dissipation identity matches finite differences of S_d") {
    // Centered differences carry an O(h^2) truncation error set by the
    // network bandwidth; check the error and that it shrinks fourfold per
    // halving of h.
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        auto s = random_setup(rng);
        ClosedLoop f(s.net, s.cfg, s.loads);
        Vector v_c;
        const auto d = f.derivative(s.state, &v_c);
        const double analytic = dissipation_rate(d, v_c, s.state, s.net, s.cfg, s.loads);

        auto Sd_at = [&](const Vector& x) {
            const SystemState st(s.state.layout(), x);
            return storage_Sd(f.derivative(st), st.u(), f.u_star(), s.cfg, s.net);
        };
        auto rel_error = [&](double h) {
            const double fd = (Sd_at(flow(f, s.state.flat(), h)) - Sd_at(flow(f, s.state.flat(), -h))) / (2 * h);
            return std::abs(fd - analytic) / std::abs(analytic);
        };
        CHECK(analytic < 0.0);
        const double e1 = rel_error(2e-6), e2 = rel_error(1e-6);
        CHECK(e2 < 1e-4);
        CHECK_THAT(e1 / e2, WithinAbs(4.0, 0.2));

        // Also matches S rate from second derivatives plus the controller terms.
        const double via_S = storage_rate(s.state, d, v_c, s.net, s.loads) +
                             (s.cfg.K_c.array() * (s.state.u() - f.u_star()).array() * v_c.array()).sum();
        CHECK_THAT(via_S, WithinRel(analytic, 1e-9));
    }
}

TEST_CASE("storage rate matches finite differences of S") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_setup(rng);
        ClosedLoop f(s.net, s.cfg, s.loads);
        Vector v_c;
        const auto d = f.derivative(s.state, &v_c);
        auto S_at = [&](const Vector& x) { return storage_S(f.derivative(SystemState(s.state.layout(), x)), s.net); };
        const double h = 1e-6;
        const double fd = (S_at(flow(f, s.state.flat(), h)) - S_at(flow(f, s.state.flat(), -h))) / (2 * h);
        const double rate = storage_rate(s.state, d, v_c, s.net, s.loads);
        CHECK_THAT(fd, WithinAbs(rate, 1e-4 * std::abs(rate) + 1e-9 * storage_S(d, s.net)));
    }
}

TEST_CASE("passivity margin is the load and line dissipation") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 300; ++trial) {
        auto s = random_setup(rng);
        ClosedLoop f(s.net, s.cfg, s.loads);
        Vector v_c;
        const auto d = f.derivative(s.state, &v_c);
        REQUIRE(check_zip_region(as_span(s.state.V()), s.loads));
        const auto pc = passivity_check(d, v_c, s.state, s.net, s.loads);
        CHECK_FALSE(pc.violated);
        CHECK(pc.margin >= -1e-6 * pc.scale);

        const Vector g = incremental_conductance(as_span(s.state.V()), s.loads);
        double expected = 0.0;
        for (std::size_t i = 0; i < s.net.n_nodes(); ++i) {
            expected += g[static_cast<Eigen::Index>(i)] * d.dV()[static_cast<Eigen::Index>(i)] * d.dV()[static_cast<Eigen::Index>(i)];
        }
        for (std::size_t k = 0; k < s.net.n_lines(); ++k) {
            expected += s.net.lines()[k].R * d.dI()[static_cast<Eigen::Index>(k)] * d.dI()[static_cast<Eigen::Index>(k)];
        }
        CHECK_THAT(pc.margin, WithinAbs(expected, 1e-9 * pc.scale));
    }
}

TEST_CASE("passivity fails outside the region") {
    // A single junction with a strong constant-power load below sqrt(P/G).
    std::vector<NodeSpec> nodes = {
        {"a", NodeKind::Dgu, 1e-3, 5e-3, 250.0, {}},
        {"b", NodeKind::Junction, 0.0, 1e-3, 0.0, {0.01, 0.0, 1e4}},
    };
    const Network net(Topology(2, {{0, 1}}), nodes, {{"ab", 0.1, 5e-4}});
    const auto loads = net.zip_loads();
    const auto state = SystemState::from_parts(Vector::Constant(1, 10.0), (Vector(2) << 300.0, 300.0).finished(),
                                               Vector::Constant(1, 50.0), Vector::Constant(1, 0.2));
    REQUIRE_FALSE(check_zip_region(as_span(state.V()), loads));
    StateDerivative d = plant_rhs(state, net);
    const Vector v_c = Vector::Zero(1);
    CHECK(passivity_check(d, v_c, state, net, loads).violated);
}
