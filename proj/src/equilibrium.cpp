#include "dcmg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcmg {

namespace {

using Matrix = Eigen::MatrixXd;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

/// Residual blocks (I_s, V, I) only; the u block is not an unknown here.
Vector scaled_plant_residual(const SystemState& state, const Network& net, std::span<const ZipLoad> loads) {
    StateDerivative d(state.layout());
    plant_rhs_into(state, net, loads, d);
    const Vector scaled = scale_by_storage(net, d);
    return scaled.head(state.layout().off_u());
}

}  // namespace

double plant_residual(const SystemState& state, const Network& net, std::span<const JunctionDemand> demand) {
    const auto loads = effective_loads(net, demand);
    return scaled_plant_residual(state, net, loads).lpNorm<Eigen::Infinity>();
}

Equilibrium steady_state_closed_form(const Vector& u_star, const Network& net,
                                     std::span<const JunctionDemand> demand,
                                     const EquilibriumOptions& options) {
    const auto n = net.n_nodes();
    const auto m = net.n_lines();
    if (u_star.size() != idx(net.n_dgu())) {
        throw ModelError("steady_state_closed_form: u* needs one entry per DGU");
    }
    for (Eigen::Index j = 0; j < u_star.size(); ++j) {
        if (!(u_star[j] >= 0.0 && u_star[j] < 1.0)) {
            std::ostringstream msg;
            msg << "steady_state_closed_form: duty " << u_star[j] << " outside [0, 1)";
            throw InfeasibleError(msg.str());
        }
    }
    const auto loads = effective_loads(net, demand);
    const auto& nodes = net.nodes();

    Vector V = Vector::Zero(idx(n));
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        const auto node = net.dgu_nodes()[j];
        V[idx(node)] = nodes[node].V_s_star / (1.0 - u_star[idx(j)]);
    }

    // Weighted Laplacian W = D R^-1 D^T.
    const Matrix D = net.incidence().cast<double>();
    Vector r_inv(idx(m));
    for (std::size_t k = 0; k < m; ++k) {
        r_inv[idx(k)] = 1.0 / net.lines()[k].R;
    }
    const Matrix W = D * r_inv.asDiagonal() * D.transpose();

    std::vector<std::size_t> junctions;
    for (std::size_t i = 0; i < n; ++i) {
        if (nodes[i].kind == NodeKind::Junction) {
            junctions.push_back(i);
        }
    }

    if (!junctions.empty()) {
        const auto nj = idx(junctions.size());
        Matrix W_jj(nj, nj);
        Vector coupling = Vector::Zero(nj);  // (W_jd V_d)
        for (Eigen::Index a = 0; a < nj; ++a) {
            const auto ja = idx(junctions[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < nj; ++b) {
                W_jj(a, b) = W(ja, idx(junctions[static_cast<std::size_t>(b)]));
            }
            for (std::size_t d : net.dgu_nodes()) {
                coupling[a] += W(ja, idx(d)) * V[idx(d)];
            }
        }

        // Junction KCL: 0 = -(G V + I + P / V) - W_jj V_j - W_jd V_d.
        // Start from the solution with the constant-power terms dropped; that
        // start is already the answer when every junction has P = 0.
        Matrix A = W_jj;
        Vector rhs = -coupling;
        bool has_power = false;
        for (Eigen::Index a = 0; a < nj; ++a) {
            const auto& ld = loads[junctions[static_cast<std::size_t>(a)]];
            A(a, a) += ld.G;
            rhs[a] -= ld.I;
            has_power = has_power || ld.P != 0.0;
        }
        Eigen::FullPivLU<Matrix> lu(A);
        if (lu.rank() < nj) {
            throw SolverError("steady_state_closed_form: singular junction subsystem");
        }
        Vector Vj = lu.solve(rhs);

        auto kcl = [&](const Vector& x) {
            Vector f = -W_jj * x - coupling;
            for (Eigen::Index a = 0; a < nj; ++a) {
                const auto& ld = loads[junctions[static_cast<std::size_t>(a)]];
                f[a] -= ld.G * x[a] + ld.I + ld.P / x[a];
            }
            return f;
        };

        if (has_power) {
            if ((Vj.array() <= 0.0).any()) {
                Vj = Vector::Constant(nj, V.maxCoeff());
            }
            Vector f = kcl(Vj);
            int it = 0;
            while (f.lpNorm<Eigen::Infinity>() >= options.junction_tol) {
                if (++it > options.max_iterations) {
                    throw SolverError("steady_state_closed_form: junction Newton did not converge");
                }
                Matrix J = -W_jj;
                for (Eigen::Index a = 0; a < nj; ++a) {
                    const auto& ld = loads[junctions[static_cast<std::size_t>(a)]];
                    J(a, a) -= ld.G - ld.P / (Vj[a] * Vj[a]);
                }
                Eigen::FullPivLU<Matrix> jlu(J);
                if (jlu.rank() < nj) {
                    throw SolverError("steady_state_closed_form: singular junction Jacobian");
                }
                const Vector step = jlu.solve(-f);
                double alpha = 1.0;
                Vector trial = Vj + step;
                while ((trial.array() <= 0.0).any() && alpha > 1e-9) {
                    alpha *= 0.5;
                    trial = Vj + alpha * step;
                }
                if ((trial.array() <= 0.0).any()) {
                    throw InfeasibleError("steady_state_closed_form: junction voltage left V > 0");
                }
                const Vector f_trial = kcl(trial);
                if (f_trial.lpNorm<Eigen::Infinity>() >= f.lpNorm<Eigen::Infinity>() &&
                    step.lpNorm<Eigen::Infinity>() * alpha < 1e-13 * trial.lpNorm<Eigen::Infinity>()) {
                    break;  // stagnated at rounding level
                }
                Vj = trial;
                f = f_trial;
            }
        }
        for (Eigen::Index a = 0; a < nj; ++a) {
            V[idx(junctions[static_cast<std::size_t>(a)])] = Vj[a];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!(V[idx(i)] > 0.0)) {
            throw InfeasibleError("steady_state_closed_form: non-positive voltage at node '" +
                                  nodes[i].label + "'");
        }
    }

    Equilibrium eq;
    eq.V_bar = V;
    eq.u_bar = u_star;
    eq.I_bar = -(r_inv.asDiagonal() * (D.transpose() * V));
    const Vector DI = D * eq.I_bar;
    eq.I_s_bar.resize(idx(net.n_dgu()));
    for (std::size_t j = 0; j < net.n_dgu(); ++j) {
        const auto node = net.dgu_nodes()[j];
        const double demand_current = zip_current(V[idx(node)], loads[node]);
        eq.I_s_bar[idx(j)] = (demand_current - DI[idx(node)]) / (1.0 - u_star[idx(j)]);
    }

    eq.residual_norm = scaled_plant_residual(eq.as_state(), net, loads).lpNorm<Eigen::Infinity>();
    eq.feasible = eq.residual_norm < options.feasibility_tol;
    eq.in_zip_region = check_zip_region(as_span(eq.V_bar), effective_loads(net, demand));
    return eq;
}

Equilibrium steady_state_newton(const SystemState& guess, const Network& net, const Vector& u_fixed,
                                std::span<const JunctionDemand> demand, const NewtonOptions& options) {
    const auto layout = StateLayout::of(net);
    if (!(guess.layout() == layout) || u_fixed.size() != idx(net.n_dgu())) {
        throw ModelError("steady_state_newton: shape mismatch");
    }
    if ((guess.V().array() <= 0.0).any()) {
        throw DomainError("steady_state_newton: initial guess has non-positive voltage");
    }
    const auto loads = effective_loads(net, demand);
    const Eigen::Index nx = layout.off_u();

    SystemState x = guess;
    x.u() = u_fixed;
    auto residual = [&](const SystemState& s) { return scaled_plant_residual(s, net, loads); };

    Vector f = residual(x);
    int iterations = 0;
    while (f.lpNorm<Eigen::Infinity>() >= options.tol) {
        if (iterations >= options.max_iterations) {
            throw SolverError("steady_state_newton: no convergence after " +
                              std::to_string(options.max_iterations) + " iterations (residual " +
                              std::to_string(f.lpNorm<Eigen::Infinity>()) + ")");
        }
        ++iterations;

        Matrix J(nx, nx);
        for (Eigen::Index c = 0; c < nx; ++c) {
            SystemState xp = x;
            const double h = 1e-6 * std::max(1.0, std::abs(x.flat()[c]));
            xp.flat()[c] += h;
            J.col(c) = (residual(xp) - f) / h;
        }
        Eigen::FullPivLU<Matrix> lu(J);
        if (lu.rank() < nx) {
            throw SolverError("steady_state_newton: singular Jacobian");
        }
        const Vector step = lu.solve(-f);

        double alpha = 1.0;
        int halvings = 0;
        SystemState trial = x;
        trial.flat().head(nx) = x.flat().head(nx) + step;
        while ((trial.V().array() <= 0.0).any()) {
            if (++halvings > options.max_halvings) {
                throw SolverError("steady_state_newton: iterate cannot be kept inside V > 0");
            }
            alpha *= 0.5;
            trial.flat().head(nx) = x.flat().head(nx) + alpha * step;
        }
        const Vector f_trial = residual(trial);
        if (f_trial.lpNorm<Eigen::Infinity>() >= f.lpNorm<Eigen::Infinity>() &&
            (alpha * step).lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, x.flat().head(nx).lpNorm<Eigen::Infinity>())) {
            break;  // rounding floor
        }
        x = trial;
        f = f_trial;
    }

    Equilibrium eq;
    eq.I_s_bar = x.I_s();
    eq.V_bar = x.V();
    eq.I_bar = x.I();
    eq.u_bar = u_fixed;
    eq.residual_norm = f.lpNorm<Eigen::Infinity>();
    eq.feasible = eq.residual_norm < options.feasibility_tol;
    eq.in_zip_region = check_zip_region(as_span(eq.V_bar), effective_loads(net, demand));
    eq.iterations = iterations;
    return eq;
}

double verify_current_balance(const Equilibrium& eq, const Network& net, std::span<const JunctionDemand> demand) {
    const auto loads = effective_loads(net, demand);
    double injected = 0.0;
    for (Eigen::Index j = 0; j < eq.I_s_bar.size(); ++j) {
        injected += (1.0 - eq.u_bar[j]) * eq.I_s_bar[j];
    }
    double demanded = 0.0;
    for (std::size_t i = 0; i < net.n_nodes(); ++i) {
        demanded += zip_current(eq.V_bar[idx(i)], loads[i]);
    }
    return std::abs(injected - demanded);
}

}  // namespace dcmg
