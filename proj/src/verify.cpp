#include "dcmg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace dcmg {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

/// True when an event fired after sample k-1 was taken and up to sample k.
bool event_between(const Trajectory& t, std::size_t k) {
    const double lo = t.samples[k - 1].t;
    const double hi = t.samples[k].t;
    return std::any_of(t.applied_events.begin(), t.applied_events.end(),
                       [&](const AppliedEvent& e) { return e.t_applied > lo && e.t_applied <= hi; });
}

CheckResult completed(const Trajectory& t) {
    if (t.termination == Termination::Completed) {
        return {"completed", true, fmt("%zu samples", t.samples.size())};
    }
    return {"completed", false, t.message};
}

CheckResult no_saturation(const Trajectory& t) {
    for (const auto& s : t.samples) {
        for (std::size_t j = 0; j < s.saturated.size(); ++j) {
            if (s.saturated[j]) {
                return {"no_saturation", false,
                        fmt("duty of DGU %s clamped before t=%.6g s", t.dgu_labels[j].c_str(), s.t)};
            }
        }
    }
    return {"no_saturation", true, "duty never clamped"};
}

CheckResult in_region(const Trajectory& t) {
    for (const auto& s : t.samples) {
        if (!s.monitor.in_zip_region) {
            return {"in_zip_region", false, fmt("left the region at t=%.6g s", s.t)};
        }
    }
    return {"in_zip_region", true, "every sample inside"};
}

CheckResult sd_monotone(const Trajectory& t, const VerifyOptions& o) {
    const double floor = o.monotone_c * std::pow(t.dt, 4);
    std::size_t checked = 0, skipped = 0;
    double worst = -std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    for (std::size_t k = 1; k < t.samples.size(); ++k) {
        const auto& a = t.samples[k - 1].monitor;
        const auto& b = t.samples[k].monitor;
        if (event_between(t, k) || !a.in_zip_region || !b.in_zip_region) {
            ++skipped;
            continue;
        }
        ++checked;
        const double excess = (b.S_d - a.S_d) - floor * (1.0 + a.S_d);
        if (excess > worst) {
            worst = excess;
            worst_t = b.t;
        }
    }
    if (checked > 0 && worst > 0.0) {
        return {"sd_monotone", false, fmt("S_d increased beyond tolerance by %.3g at t=%.6g s", worst, worst_t)};
    }
    return {"sd_monotone", true,
            fmt("%zu intervals checked, %zu skipped (event or out of region), tolerance %.3g (1 + S_d)", checked,
                skipped, floor)};
}

CheckResult passivity(const Trajectory& t, const VerifyOptions& o) {
    double worst = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    for (const auto& s : t.samples) {
        const double scaled = s.monitor.passivity_margin + o.passivity_tolerance * s.monitor.passivity_scale;
        if (scaled < worst) {
            worst = scaled;
            worst_t = s.t;
        }
    }
    if (worst < 0.0) {
        return {"passivity", false, fmt("margin below -tol*scale by %.3g at t=%.6g s", -worst, worst_t)};
    }
    return {"passivity", true, "margin >= -tol*scale at every sample"};
}

CheckResult convergence(const Trajectory& t, const VerifyOptions& o) {
    const double end = t.samples.back().t;
    std::vector<double> starts{0.0};
    for (const auto& e : t.applied_events) {
        if (e.t_applied != starts.back()) {
            starts.push_back(e.t_applied);
        }
    }
    const bool no_events = starts.size() == 1;
    std::string detail;
    for (std::size_t w = 0; w < starts.size(); ++w) {
        const double stop = w + 1 < starts.size() ? starts[w + 1] : end + 0.5 * t.record_dt;
        const double from = no_events ? end : starts[w] + o.settle_window;
        if (w == 0 && !no_events) {
            continue;  // initial phase before the first event
        }
        if (from >= stop) {
            return {"convergence", false,
                    fmt("only %.6g s between t=%.6g s and the next event or the end, need %.6g s", stop - starts[w],
                        starts[w], o.settle_window)};
        }
        double worst = 0.0, worst_t = from;
        std::string worst_node;
        for (const auto& s : t.samples) {
            if (s.t < from - 1e-12 || s.t >= stop) {
                continue;
            }
            for (std::size_t j = 0; j < t.dgu_nodes.size(); ++j) {
                const double err = std::abs(s.x[t.layout.off_V() + idx(t.dgu_nodes[j])] - s.V_d_star[idx(j)]);
                if (err > worst) {
                    worst = err;
                    worst_t = s.t;
                    worst_node = t.dgu_labels[j];
                }
            }
        }
        if (worst >= o.settle_tolerance) {
            return {"convergence", false,
                    fmt("|V - V_d*| = %.4g V at node %s, t=%.6g s (window from t=%.6g s)", worst, worst_node.c_str(),
                        worst_t, from)};
        }
        detail += fmt("%s[%.6g s, %.6g s) max %.3g V", detail.empty() ? "" : "; ", from, std::min(stop, end), worst);
    }
    return {"convergence", true, detail};
}

CheckResult deviation(const Trajectory& t, const VerifyOptions& o) {
    double worst_ctrl = 0.0, worst_unctrl = 0.0;
    double t_ctrl = 0.0, t_unctrl = 0.0;
    std::string n_ctrl = "-", n_unctrl = "-";
    for (const auto& s : t.samples) {
        const auto& dev = s.monitor.max_voltage_deviation_pct;
        for (std::size_t i = 0; i < t.node_labels.size(); ++i) {
            const bool controlled = std::find(t.dgu_nodes.begin(), t.dgu_nodes.end(), i) != t.dgu_nodes.end();
            double& worst = controlled ? worst_ctrl : worst_unctrl;
            if (dev[idx(i)] > worst) {
                worst = dev[idx(i)];
                (controlled ? t_ctrl : t_unctrl) = s.t;
                (controlled ? n_ctrl : n_unctrl) = t.node_labels[i];
            }
        }
    }
    const bool ok = worst_ctrl < o.controlled_pct && worst_unctrl < o.uncontrolled_pct;
    return {"deviation_bounds", ok,
            fmt("controlled worst %.4g%% (node %s, t=%.6g s, bound %.3g%%); uncontrolled worst %.4g%% (node %s, "
                "t=%.6g s, bound %.3g%%)",
                worst_ctrl, n_ctrl.c_str(), t_ctrl, o.controlled_pct, worst_unctrl, n_unctrl.c_str(), t_unctrl,
                o.uncontrolled_pct)};
}

CheckResult endpoint(const Trajectory& t, const VerifyOptions& o) {
    double peak = 0.0;
    for (const auto& s : t.samples) {
        peak = std::max(peak, s.monitor.S_d);
    }
    const double last = t.samples.back().monitor.S_d;
    const double bound = o.endpoint_ratio * std::max(1.0, peak);
    return {"endpoint", last <= bound, fmt("final S_d %.3g, bound %.3g (peak %.3g)", last, bound, peak)};
}

}  // namespace

bool VerifyReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult& VerifyReport::find(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) {
            return c;
        }
    }
    throw std::out_of_range("no check named " + name);
}

VerifyReport verify_trajectory(const Trajectory& t, const VerifyOptions& o) {
    VerifyReport r;
    r.checks.push_back(completed(t));
    if (t.samples.empty()) {
        return r;
    }
    r.checks.push_back(no_saturation(t));
    r.checks.push_back(in_region(t));
    r.checks.push_back(sd_monotone(t, o));
    r.checks.push_back(passivity(t, o));
    if (t.termination == Termination::Completed) {
        r.checks.push_back(convergence(t, o));
        r.checks.push_back(endpoint(t, o));
    }
    r.checks.push_back(deviation(t, o));
    return r;
}

}  // namespace dcmg
