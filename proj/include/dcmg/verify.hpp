#pragma once

// Invariant suite evaluated on a finished trajectory.

#include "dcmg/sim_engine.hpp"

#include <string>
#include <vector>

namespace dcmg {

struct VerifyOptions {
    double settle_window = 10.0;      // s after each event
    double settle_tolerance = 0.1;    // V, at DGU nodes
    double controlled_pct = 4.0;      // DGU nodes
    double uncontrolled_pct = 7.0;    // junction nodes
    double monotone_c = 100.0;        // S_d tolerance c dt^4 (1 + S_d)
    double passivity_tolerance = 1e-6;
    double endpoint_ratio = 1e-6;     // final S_d relative to its peak
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;

    [[nodiscard]] bool passed() const;
    [[nodiscard]] const CheckResult& find(const std::string& name) const;
};

/// Checks: completed, no_saturation, in_zip_region, sd_monotone, passivity,
/// convergence, deviation_bounds, endpoint.
[[nodiscard]] VerifyReport verify_trajectory(const Trajectory& trajectory, const VerifyOptions& options = {});

}  // namespace dcmg
